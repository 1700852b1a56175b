#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "duality/dual_models.hpp"
#include "duality/lm.hpp"
#include "duality/made.hpp"

namespace duality {

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single-file checkpoint: magic, format version, a JSON manifest (module
// name, hyperparameters, tensor names and shapes, degree vectors where
// applicable), then the raw little-endian double payloads in manifest order.
inline constexpr char kCheckpointMagic[8] = {'D', 'U', 'A', 'L',
                                             'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint_raw(
    const std::string& path, const std::string& module,
    const nlohmann::json& config,
    const std::vector<std::pair<std::string, TensorPtr>>& tensors);

struct LoadedCheckpoint {
  nlohmann::json manifest;
  std::map<std::string, TensorPtr> tensors;
};

LoadedCheckpoint load_checkpoint_raw(const std::string& path,
                                     const std::string& expected_module);

void save_checkpoint(const LanguageModel& m, const std::string& path);
LanguageModel load_language_model(const std::string& path);

void save_checkpoint(const MadeEnsemble& ens, const std::string& path);
MadeEnsemble load_made_ensemble(const std::string& path);

void save_checkpoint(const NlgModel& m, const std::string& path);
NlgModel load_nlg_model(const std::string& path);

void save_checkpoint(const NluModel& m, const std::string& path);
NluModel load_nlu_model(const std::string& path);

}  // namespace duality
