#pragma once

#include <string_view>

namespace uem {

/// A is the query domain, B the retrieval domain.
enum class Domain { a, b };

constexpr std::string_view to_string(Domain d) { return d == Domain::a ? "A" : "B"; }
constexpr Domain other(Domain d) { return d == Domain::a ? Domain::b : Domain::a; }

}  // namespace uem
