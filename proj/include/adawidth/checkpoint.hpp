#pragma once

#include <string>

#include "adawidth/data.hpp"
#include "adawidth/encoder.hpp"

namespace adawidth {

// Single JSON container holding the architecture, every named parameter
// tensor (row-major), the init seed, and the vocabulary. Field order is
// fixed, so identical models serialize to identical bytes.
void save_checkpoint(const std::string& path, const Model& model,
                     const Vocab& vocab);

std::string checkpoint_to_string(const Model& model, const Vocab& vocab);

Model load_checkpoint(const std::string& path, Vocab* vocab_out = nullptr);

}  // namespace adawidth
