#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

namespace fus {

/// Per-sample correctness bits recorded at successive training steps
/// (epoch-end evaluations). Columns are appended in strictly increasing
/// epoch order.
class CorrectnessTrace {
public:
    explicit CorrectnessTrace(std::vector<size_t> sample_ids);

    void observe(int epoch, const std::vector<uint8_t>& correct);

    size_t samples() const { return ids_.size(); }
    size_t steps() const { return step_epochs_.size(); }
    const std::vector<size_t>& ids() const { return ids_; }
    const std::vector<int>& step_epochs() const { return step_epochs_; }

    /// Correctness of sample (row) at recorded step (column).
    uint8_t bit(size_t sample, size_t step) const { return bits_[step * ids_.size() + sample]; }

private:
    std::vector<size_t> ids_;
    std::vector<uint8_t> bits_;  // step-major, one column per observe()
    std::vector<int> step_epochs_;
};

/// Number of remembered->forgotten transitions per monitored sample.
struct ForgettingCounts {
    std::vector<size_t> ids;
    std::vector<int> counts;

    size_t size() const { return ids.size(); }
    /// Count for a sample id; throws if the id was not monitored.
    int for_id(size_t id) const;
};

/// Count adjacent (correct, incorrect) pairs per sample.
ForgettingCounts forgetting_counts(const CorrectnessTrace& trace);

/// Fractions per bucket: {0, 1, ..., tail_start-1, >= tail_start}.
std::vector<double> histogram(const ForgettingCounts& counts, int tail_start);

/// Rows of (sample_id, epoch, correct) for offline analysis.
void write_trace_csv(const CorrectnessTrace& trace, std::ostream& out);

}  // namespace fus
