#include "paflab/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "paflab/errors.hpp"

namespace paflab {

std::string_view to_string(DesignVariant v) {
    switch (v) {
        case DesignVariant::saf:
            return "SAF";
        case DesignVariant::paf:
            return "PAF";
        case DesignVariant::no_ffn:
            return "NoFFN";
        case DesignVariant::no_skip_no_ffn:
            return "NoSkipNoFFN";
    }
    return "?";
}

DesignVariant parse_variant(std::string_view name) {
    for (DesignVariant v : {DesignVariant::saf, DesignVariant::paf, DesignVariant::no_ffn,
                            DesignVariant::no_skip_no_ffn}) {
        if (name == to_string(v)) {
            return v;
        }
    }
    throw ConfigError("unknown variant '" + std::string(name) + "' (expected SAF, PAF, NoFFN or NoSkipNoFFN)");
}

double isotropy(const Tensor& e) {
    const std::size_t n = e.rows();
    if (n == 0) {
        throw DegenerateInputError("isotropy: empty embedding matrix");
    }
    std::vector<double> direction_sum(e.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = e.row(i);
        double sq = 0.0;
        for (double v : row) {
            sq += v * v;
        }
        if (sq == 0.0) {
            throw DegenerateInputError("isotropy: row " + std::to_string(i) + " has zero norm");
        }
        const double norm = std::sqrt(sq);
        for (std::size_t c = 0; c < row.size(); ++c) {
            direction_sum[c] += row[c] / norm;
        }
    }
    double total = 0.0;
    for (double v : direction_sum) {
        total += v * v;
    }
    const double nn = static_cast<double>(n);
    // Bounded by 1; rounding in the unit rows can overshoot by an ulp.
    return std::min(1.0, total / (nn * nn));
}

double residual_ratio(const LayerProbe& probe) {
    if (probe.input_norm == 0.0) {
        throw DegenerateInputError("residual_ratio: layer " + std::to_string(probe.layer_index) +
                                   " has zero input norm");
    }
    return probe.attn_residual_norm / probe.input_norm;
}

double ProbeTrace::final_isotropy() const {
    if (probes.empty()) {
        throw ContractError("final_isotropy: empty trace");
    }
    return probes.back().isotropy;
}

double ProbeTrace::mean_residual_ratio() const {
    if (probes.empty()) {
        throw ContractError("mean_residual_ratio: empty trace");
    }
    double s = 0.0;
    for (const auto& p : probes) {
        s += residual_ratio(p);
    }
    return s / static_cast<double>(probes.size());
}

double ProbeTrace::max_residual_ratio() const {
    double m = 0.0;
    for (const auto& p : probes) {
        m = std::max(m, residual_ratio(p));
    }
    return m;
}

std::vector<LayerProbe> average_probes(std::span<const std::vector<LayerProbe>> per_sequence) {
    if (per_sequence.empty()) {
        return {};
    }
    std::vector<LayerProbe> out(per_sequence.front().size());
    for (std::size_t l = 0; l < out.size(); ++l) {
        out[l].layer_index = l;
    }
    for (const auto& seq : per_sequence) {
        if (seq.size() != out.size()) {
            throw ContractError("average_probes: sequences disagree on layer count");
        }
        for (std::size_t l = 0; l < out.size(); ++l) {
            out[l].isotropy += seq[l].isotropy;
            out[l].input_norm += seq[l].input_norm;
            out[l].attn_residual_norm += seq[l].attn_residual_norm;
            out[l].ffn_residual_norm += seq[l].ffn_residual_norm;
        }
    }
    const double k = static_cast<double>(per_sequence.size());
    for (auto& p : out) {
        p.isotropy /= k;
        p.input_norm /= k;
        p.attn_residual_norm /= k;
        p.ffn_residual_norm /= k;
    }
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_trace_csv(std::ostream& out, std::span<const ProbeTrace> traces) {
    out << kTraceCsvHeader << '\n';
    for (const auto& trace : traces) {
        for (const auto& p : trace.probes) {
            out << to_string(trace.variant) << ',' << p.layer_index << ',' << fmt17(p.isotropy) << ','
                << fmt17(p.input_norm) << ',' << fmt17(p.attn_residual_norm) << ','
                << fmt17(p.ffn_residual_norm) << ',' << fmt17(residual_ratio(p)) << '\n';
        }
    }
}

std::string trace_csv(std::span<const ProbeTrace> traces) {
    std::ostringstream os;
    write_trace_csv(os, traces);
    return os.str();
}

}  // namespace paflab
