#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardioforge/common.hpp"

namespace cardioforge {

enum class Modality { PCG, ECG };
enum class Label { Normal, Abnormal };
enum class SourceKind { Original, Augmented, Synthetic };

std::string to_string(Modality m);
std::string to_string(Label l);
Modality modality_from_string(const std::string& s);
Label label_from_string(const std::string& s);

struct SourceTag {
    SourceKind kind = SourceKind::Original;
    std::string generator;  // set for SourceKind::Synthetic

    std::string str() const;
    static SourceTag parse(const std::string& s);
};

// One sampled signal. Samples are dimensionless, nominally in [-1, 1].
struct Recording {
    std::vector<double> samples;
    double fs = 0.0;
    Modality modality = Modality::PCG;
    std::string channel_site;  // optional auscultation-site tag

    double duration_s() const { return fs > 0 ? static_cast<double>(samples.size()) / fs : 0.0; }
    void validate() const;
};

// Subject-level record: one or more synchronized channels.
struct MultiRecord {
    std::string subject_id;
    Label label = Label::Normal;
    std::vector<Recording> channels;
    SourceTag source;

    void validate() const;
};

// A fixed-length analysis window cut from a record, all channels aligned.
struct Fragment {
    std::vector<std::vector<double>> channels;
    double fs = 0.0;
    std::string subject_id;
    Label label = Label::Normal;
    SourceTag source;
    double offset_s = 0.0;

    size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

struct ManifestEntry {
    std::vector<std::string> paths;  // one WAV per channel
    std::string subject_id;
    Label label = Label::Normal;
    std::string dataset;
    std::vector<Modality> modalities;
    std::vector<std::string> sites;
    SourceTag source;
    // Provenance for augmented/synthetic entries.
    std::string source_subject;
    uint64_t seed = 0;
    std::vector<std::string> applied_ops;
};

namespace signal_io {

Recording read_wav(const std::string& path);
void write_wav(const Recording& rec, const std::string& path, bool float32 = false);

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

// Loads every channel of a manifest entry; paths are resolved relative to
// the manifest's directory unless absolute.
MultiRecord load_entry(const ManifestEntry& entry, const std::string& manifest_dir);

struct SplitResult {
    std::vector<ManifestEntry> train, val, test;
};

// Subject-level stratified split with largest-remainder rounding.
SplitResult stratified_split(const std::vector<ManifestEntry>& entries,
                             const std::array<double, 3>& ratios, uint64_t seed);

// k folds, subject-disjoint, sizes within 1, per-fold class proportion
// within +-1 subject of the global proportion.
std::vector<std::vector<ManifestEntry>> stratified_kfold(const std::vector<ManifestEntry>& entries,
                                                         int k, uint64_t seed);

struct FoldAssignment {
    std::vector<ManifestEntry> train, val, test;
    int test_fold = 0;
    int val_fold = 0;
};

// Rotation rule: fold i is the test set and fold (i+1) mod k the validation
// set, so no fold serves as test or validation twice across the k rounds.
FoldAssignment kfold_assignment(const std::vector<std::vector<ManifestEntry>>& folds, int round);

}  // namespace signal_io
}  // namespace cardioforge
