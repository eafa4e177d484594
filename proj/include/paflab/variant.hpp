#pragma once

#include <string_view>

namespace paflab {

/// Layer design. NoFFN drops the feed-forward block from SAF; NoSkipNoFFN
/// additionally drops the attention skip connection.
enum class DesignVariant { saf, paf, no_ffn, no_skip_no_ffn };

std::string_view to_string(DesignVariant v);
DesignVariant parse_variant(std::string_view name);

}  // namespace paflab
