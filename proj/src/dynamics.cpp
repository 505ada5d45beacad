#include "fus/dynamics.hpp"

#include <algorithm>

#include "fus/error.hpp"

namespace fus {

CorrectnessTrace::CorrectnessTrace(std::vector<size_t> sample_ids) : ids_(std::move(sample_ids)) {
    if (ids_.empty()) throw ConfigError("trace: no samples to monitor");
}

void CorrectnessTrace::observe(int epoch, const std::vector<uint8_t>& correct) {
    if (correct.size() != ids_.size()) {
        throw ConfigError("trace: observed " + std::to_string(correct.size()) + " flags for " +
                          std::to_string(ids_.size()) + " monitored samples");
    }
    if (!step_epochs_.empty() && epoch <= step_epochs_.back()) {
        throw ConfigError("trace: epoch " + std::to_string(epoch) +
                          " not after last recorded epoch " + std::to_string(step_epochs_.back()));
    }
    step_epochs_.push_back(epoch);
    bits_.insert(bits_.end(), correct.begin(), correct.end());
}

int ForgettingCounts::for_id(size_t id) const {
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return counts[i];
    }
    throw ConfigError("forgetting counts: no record for sample " + std::to_string(id));
}

ForgettingCounts forgetting_counts(const CorrectnessTrace& trace) {
    if (trace.steps() == 0) throw ConfigError("forgetting counts: empty trace");
    ForgettingCounts out;
    out.ids = trace.ids();
    out.counts.assign(trace.samples(), 0);
    for (size_t s = 0; s < trace.samples(); ++s) {
        for (size_t t = 0; t + 1 < trace.steps(); ++t) {
            if (trace.bit(s, t) != 0 && trace.bit(s, t + 1) == 0) ++out.counts[s];
        }
    }
    return out;
}

std::vector<double> histogram(const ForgettingCounts& counts, int tail_start) {
    if (counts.size() == 0) throw ConfigError("histogram: empty counts");
    if (tail_start < 1) throw ConfigError("histogram: tail bucket must start at >= 1");
    std::vector<double> buckets(static_cast<size_t>(tail_start) + 1, 0.0);
    for (int c : counts.counts) {
        buckets[static_cast<size_t>(std::min(c, tail_start))] += 1.0;
    }
    for (double& b : buckets) b /= static_cast<double>(counts.size());
    return buckets;
}

void write_trace_csv(const CorrectnessTrace& trace, std::ostream& out) {
    out << "sample_id,epoch,correct\n";
    for (size_t t = 0; t < trace.steps(); ++t) {
        for (size_t s = 0; s < trace.samples(); ++s) {
            out << trace.ids()[s] << ',' << trace.step_epochs()[t] << ','
                << static_cast<int>(trace.bit(s, t)) << '\n';
        }
    }
}

}  // namespace fus
