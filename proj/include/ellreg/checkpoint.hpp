#pragma once

#include <filesystem>
#include <iosfwd>

#include "ellreg/nn.hpp"

namespace ellreg {

/// Plain-text model checkpoint:
///
///     ellreg-mlp 1
///     layer_sizes 2 4 2
///     activation leaky_relu 0.10000000000000001
///     head softmax
///     weight 0 4 2
///     <one row per line>
///     bias 0 4
///     <values>
///     ...
///
/// Values are written with 17 significant digits, so a save/load cycle is bit-exact.
void write_checkpoint(std::ostream& out, const Mlp& model);
Mlp read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Mlp& model);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace ellreg
