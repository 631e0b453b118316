#pragma once

#include <string>
#include <string_view>

#include "premir/random.hpp"

namespace premir {

/// Random permutation of `seq` that preserves every dinucleotide count and
/// the first and last character (Altschul-Erickson shuffle via a random
/// Eulerian walk on the dinucleotide multigraph).
std::string dinucleotide_shuffle(std::string_view seq, Rng& rng);

}  // namespace premir
