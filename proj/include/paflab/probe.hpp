#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "paflab/tensor.hpp"
#include "paflab/variant.hpp"

namespace paflab {

/// Mean cosine similarity over all ordered row pairs, diagonal included:
///   I(E) = sum_i sum_j <E_i, E_j> / (n^2 |E_i| |E_j|)
/// Evaluated as |sum_i E_i/|E_i||^2 / n^2. Throws DegenerateInputError on an
/// empty matrix or any zero row.
double isotropy(const Tensor& embeddings);

/// Per-layer measurements. Norms are per-token L2 norms averaged over tokens.
struct LayerProbe {
    std::size_t layer_index = 0;
    double isotropy = 0.0;            // of the layer output
    double input_norm = 0.0;          // of the layer input X_l
    double attn_residual_norm = 0.0;  // of A_l(X_l)
    double ffn_residual_norm = 0.0;   // of the FFN residual, 0 when absent
};

/// attn_residual_norm / input_norm. Throws DegenerateInputError when the
/// input norm is zero.
double residual_ratio(const LayerProbe& probe);

struct ProbeTrace {
    std::string model_id;
    DesignVariant variant = DesignVariant::saf;
    std::vector<LayerProbe> probes;
    std::string probe_batch;

    double final_isotropy() const;
    double mean_residual_ratio() const;
    double max_residual_ratio() const;
};

/// Averages per-sequence probe lists field by field, in sequence order.
std::vector<LayerProbe> average_probes(std::span<const std::vector<LayerProbe>> per_sequence);

inline constexpr const char* kTraceCsvHeader =
    "variant,layer,isotropy,input_norm,attn_residual_norm,ffn_residual_norm,ratio";

/// Header line plus one row per layer per trace, 17 significant digits.
void write_trace_csv(std::ostream& out, std::span<const ProbeTrace> traces);
std::string trace_csv(std::span<const ProbeTrace> traces);

}  // namespace paflab
