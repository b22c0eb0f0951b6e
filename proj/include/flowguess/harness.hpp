#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowguess/flow.hpp"
#include "flowguess/report.hpp"
#include "flowguess/sampling.hpp"
#include "flowguess/training.hpp"

namespace flowguess {

struct SplitSpec {
    double train_fraction = 0.8;
    std::optional<std::size_t> train_subsample;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Split {
    std::vector<std::string> train;  // keeps duplicates; subsampled when requested
    std::vector<std::string> test;   // distinct, disjoint from the whole train partition
};

// Seeded shuffle, then the first train_fraction goes to train. The test side is
// de-duplicated and stripped of anything that occurs in the train partition.
Split split_and_clean(const std::vector<std::string>& corpus, const SplitSpec& spec);

// Single pass over a guess list against a plaintext test set.
MatchReport evaluate(const std::vector<std::string>& guesses, const std::vector<std::string>& test);

// Template mixture for the synthetic corpus (weights are relative), in order:
// name+2-digit year, word+digit, word+symbol+digits, lowercase word, leetified word.
using TemplateWeights = std::array<double, 5>;
inline constexpr TemplateWeights kDefaultTemplateWeights{0.3, 0.2, 0.2, 0.15, 0.15};

const std::vector<std::string>& bundled_words();
const std::vector<std::string>& bundled_names();

std::vector<std::string> gen_synthetic_corpus(std::size_t n, std::uint64_t seed,
                                              const TemplateWeights& weights = kDefaultTemplateWeights,
                                              int max_length = kDefaultMaxLength);

struct AblationRow {
    MaskSpec mask;
    double final_loss = 0.0;
    MatchReport report;
};

using AblationProgress = std::function<void(const std::string& message)>;

// Trains one model per mask kind with identical seeds and hyperparameters and
// counts static-sampling matches against `test` at `sampling.n_guesses`.
std::vector<AblationRow> masking_ablation(const std::vector<std::string>& train,
                                          const std::vector<std::string>& test, const std::vector<MaskSpec>& kinds,
                                          const FlowConfig& model_config, const TrainConfig& train_config,
                                          const SamplingConfig& sampling, std::uint64_t model_seed,
                                          const AblationProgress& progress = {});

// Tab-separated: mask, guesses, unique, matched, match_rate, final_loss.
std::string ablation_table(const std::vector<AblationRow>& rows);

struct SweepRow {
    std::size_t train_size = 0;
    std::uint64_t matched = 0;
    double marginal_improvement = 0.0;  // relative to the first (baseline) size
};

// Trains on growing prefixes of `train` and reports matches relative to the
// smallest size.
std::vector<SweepRow> train_size_sweep(const std::vector<std::string>& train, const std::vector<std::string>& test,
                                       const std::vector<std::size_t>& sizes, const FlowConfig& model_config,
                                       const TrainConfig& train_config, const SamplingConfig& sampling,
                                       std::uint64_t model_seed);

}  // namespace flowguess
