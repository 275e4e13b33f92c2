#include "cardioforge/signal_io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cardioforge {

std::string to_string(Modality m) { return m == Modality::PCG ? "PCG" : "ECG"; }
std::string to_string(Label l) { return l == Label::Normal ? "Normal" : "Abnormal"; }

Modality modality_from_string(const std::string& s) {
    if (s == "PCG") return Modality::PCG;
    if (s == "ECG") return Modality::ECG;
    throw FormatError("unknown modality: " + s);
}

Label label_from_string(const std::string& s) {
    if (s == "Normal") return Label::Normal;
    if (s == "Abnormal") return Label::Abnormal;
    throw FormatError("unknown label: " + s);
}

std::string SourceTag::str() const {
    switch (kind) {
        case SourceKind::Original: return "original";
        case SourceKind::Augmented: return "augmented";
        case SourceKind::Synthetic: return "synthetic:" + generator;
    }
    return "original";
}

SourceTag SourceTag::parse(const std::string& s) {
    SourceTag tag;
    if (s == "original") {
        tag.kind = SourceKind::Original;
    } else if (s == "augmented") {
        tag.kind = SourceKind::Augmented;
    } else if (s.rfind("synthetic:", 0) == 0) {
        tag.kind = SourceKind::Synthetic;
        tag.generator = s.substr(10);
    } else {
        throw FormatError("unknown source tag: " + s);
    }
    return tag;
}

void Recording::validate() const {
    if (fs <= 0.0) throw ArgumentError("Recording: fs must be positive");
    if (samples.empty()) throw ArgumentError("Recording: samples must be non-empty");
    if (!all_finite(samples)) throw ArgumentError("Recording: samples must be finite");
}

void MultiRecord::validate() const {
    if (channels.empty()) throw ArgumentError("MultiRecord: at least one channel required");
    for (const auto& ch : channels) ch.validate();
    const double d0 = channels.front().duration_s();
    for (const auto& ch : channels) {
        if (std::abs(ch.duration_s() - d0) * ch.fs > 1.0 + 1e-9) {
            throw ArgumentError("MultiRecord: channels must share duration within one sample");
        }
    }
}

namespace signal_io {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw FormatError("wav: truncated file");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

}  // namespace

Recording read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("wav: cannot open " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw FormatError("wav: missing RIFF header");
    read_le<uint32_t>(in);  // riff size, unreliable in the wild
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw FormatError("wav: not a WAVE file");

    uint16_t format = 0, n_channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    bool have_fmt = false;
    Recording rec;

    while (in.read(tag, 4)) {
        const uint32_t chunk_size = read_le<uint32_t>(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw FormatError("wav: malformed fmt chunk");
            format = read_le<uint16_t>(in);
            n_channels = read_le<uint16_t>(in);
            sample_rate = read_le<uint32_t>(in);
            read_le<uint32_t>(in);  // byte rate
            read_le<uint16_t>(in);  // block align
            bits = read_le<uint16_t>(in);
            in.ignore(chunk_size - 16);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
            if (n_channels != 1) throw UnsupportedError("wav: only mono files are supported");
            if (format == kFormatPcm && bits == 16) {
                const size_t n = chunk_size / 2;
                rec.samples.resize(n);
                for (size_t i = 0; i < n; ++i) {
                    const auto raw = static_cast<int16_t>(read_le<uint16_t>(in));
                    rec.samples[i] = static_cast<double>(raw) / 32768.0;
                }
            } else if (format == kFormatFloat && bits == 32) {
                const size_t n = chunk_size / 4;
                rec.samples.resize(n);
                for (size_t i = 0; i < n; ++i) {
                    const uint32_t raw = read_le<uint32_t>(in);
                    float f;
                    std::memcpy(&f, &raw, 4);
                    rec.samples[i] = static_cast<double>(f);
                }
            } else {
                throw UnsupportedError("wav: only PCM16 and float32 are supported");
            }
            rec.fs = static_cast<double>(sample_rate);
            return rec;
        } else {
            in.ignore(chunk_size + (chunk_size & 1));
            if (!in) throw FormatError("wav: truncated chunk");
        }
    }
    throw FormatError("wav: no data chunk found");
}

void write_wav(const Recording& rec, const std::string& path, bool float32) {
    if (!all_finite(rec.samples)) throw ArgumentError("wav: samples must be finite");
    if (rec.fs <= 0.0) throw ArgumentError("wav: sample rate must be positive");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("wav: cannot open for writing: " + path);

    const uint16_t bits = float32 ? 32 : 16;
    const uint32_t bytes_per_sample = bits / 8;
    const uint32_t data_size = static_cast<uint32_t>(rec.samples.size() * bytes_per_sample);
    const uint32_t fact_size = float32 ? 12 : 0;
    const uint32_t riff_size = 4 + (8 + 16) + fact_size + (8 + data_size);

    out.write("RIFF", 4);
    write_le<uint32_t>(out, riff_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<uint32_t>(out, 16);
    write_le<uint16_t>(out, float32 ? kFormatFloat : kFormatPcm);
    write_le<uint16_t>(out, 1);
    write_le<uint32_t>(out, static_cast<uint32_t>(std::llround(rec.fs)));
    write_le<uint32_t>(out, static_cast<uint32_t>(std::llround(rec.fs)) * bytes_per_sample);
    write_le<uint16_t>(out, static_cast<uint16_t>(bytes_per_sample));
    write_le<uint16_t>(out, bits);
    if (float32) {
        out.write("fact", 4);
        write_le<uint32_t>(out, 4);
        write_le<uint32_t>(out, static_cast<uint32_t>(rec.samples.size()));
    }
    out.write("data", 4);
    write_le<uint32_t>(out, data_size);
    for (double x : rec.samples) {
        if (float32) {
            const float f = static_cast<float>(x);
            uint32_t raw;
            std::memcpy(&raw, &f, 4);
            write_le<uint32_t>(out, raw);
        } else {
            long q = std::lround(x * 32768.0);
            q = std::clamp(q, -32768L, 32767L);
            write_le<uint16_t>(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
        }
    }
    if (!out) throw IoError("wav: write failed: " + path);
}

namespace {

json entry_to_json(const ManifestEntry& e) {
    json j;
    j["paths"] = e.paths;
    j["subject_id"] = e.subject_id;
    j["label"] = to_string(e.label);
    j["dataset"] = e.dataset;
    json mods = json::array();
    for (auto m : e.modalities) mods.push_back(to_string(m));
    j["modalities"] = mods;
    j["sites"] = e.sites;
    j["source"] = e.source.str();
    if (!e.source_subject.empty()) j["source_subject"] = e.source_subject;
    if (e.seed != 0) j["seed"] = e.seed;
    if (!e.applied_ops.empty()) j["applied_ops"] = e.applied_ops;
    return j;
}

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.paths = j.at("paths").get<std::vector<std::string>>();
    e.subject_id = j.at("subject_id").get<std::string>();
    e.label = label_from_string(j.at("label").get<std::string>());
    e.dataset = j.value("dataset", "");
    for (const auto& m : j.at("modalities")) e.modalities.push_back(modality_from_string(m));
    e.sites = j.value("sites", std::vector<std::string>{});
    e.source = SourceTag::parse(j.value("source", "original"));
    e.source_subject = j.value("source_subject", "");
    e.seed = j.value("seed", uint64_t{0});
    e.applied_ops = j.value("applied_ops", std::vector<std::string>{});
    return e;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& err) {
            throw FormatError("manifest: bad JSON at " + path + ":" + std::to_string(line_no) +
                              ": " + err.what());
        }
        entries.push_back(entry_from_json(j));
    }
    return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("manifest: cannot open for writing: " + path);
    for (const auto& e : entries) out << entry_to_json(e).dump() << "\n";
    if (!out) throw IoError("manifest: write failed: " + path);
}

MultiRecord load_entry(const ManifestEntry& entry, const std::string& manifest_dir) {
    if (entry.paths.empty()) throw FormatError("manifest entry has no paths");
    MultiRecord rec;
    rec.subject_id = entry.subject_id;
    rec.label = entry.label;
    rec.source = entry.source;
    for (size_t i = 0; i < entry.paths.size(); ++i) {
        fs::path p(entry.paths[i]);
        if (p.is_relative()) p = fs::path(manifest_dir) / p;
        Recording ch = read_wav(p.string());
        ch.modality = i < entry.modalities.size() ? entry.modalities[i] : Modality::PCG;
        if (i < entry.sites.size()) ch.channel_site = entry.sites[i];
        rec.channels.push_back(std::move(ch));
    }
    return rec;
}

namespace {

// Largest-remainder allocation of `total` items into quotas total*weights[i].
std::vector<int> largest_remainder(int total, const std::vector<double>& weights) {
    const size_t n = weights.size();
    std::vector<int> counts(n);
    std::vector<double> remainders(n);
    int allocated = 0;
    for (size_t i = 0; i < n; ++i) {
        const double quota = total * weights[i];
        counts[i] = static_cast<int>(std::floor(quota));
        remainders[i] = quota - counts[i];
        allocated += counts[i];
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return remainders[a] > remainders[b]; });
    for (int i = 0; allocated < total; ++i, ++allocated) counts[order[i % n]] += 1;
    return counts;
}

// Per-class allocation matrix with exact column sums (partition sizes) and
// exact row sums (class sizes), every entry within floor/ceil of its quota.
// Starts from per-class largest remainder, then repairs column totals with
// moves that stay inside the floor/ceil box (controlled rounding).
std::vector<std::vector<int>> stratified_allocation(const std::vector<int>& class_sizes,
                                                    const std::vector<double>& part_weights) {
    const size_t n_classes = class_sizes.size();
    const size_t n_parts = part_weights.size();
    const int total = std::accumulate(class_sizes.begin(), class_sizes.end(), 0);
    const std::vector<int> part_totals = largest_remainder(total, part_weights);

    std::vector<std::vector<int>> alloc(n_classes);
    std::vector<std::vector<double>> quota(n_classes, std::vector<double>(n_parts));
    for (size_t c = 0; c < n_classes; ++c) {
        alloc[c] = largest_remainder(class_sizes[c], part_weights);
        for (size_t p = 0; p < n_parts; ++p) quota[c][p] = class_sizes[c] * part_weights[p];
    }

    auto column_sum = [&](size_t p) {
        int s = 0;
        for (size_t c = 0; c < n_classes; ++c) s += alloc[c][p];
        return s;
    };

    // Column sums can disagree with targets by at most a few units; each
    // repair move keeps both touched entries within their floor/ceil bounds.
    for (size_t iter = 0; iter < n_classes * n_parts * 4; ++iter) {
        size_t over = n_parts, under = n_parts;
        for (size_t p = 0; p < n_parts; ++p) {
            const int diff = column_sum(p) - part_totals[p];
            if (diff > 0 && over == n_parts) over = p;
            if (diff < 0 && under == n_parts) under = p;
        }
        if (over == n_parts && under == n_parts) break;
        bool moved = false;
        for (size_t c = 0; c < n_classes && !moved; ++c) {
            const bool can_take = alloc[c][over] > static_cast<int>(std::floor(quota[c][over]));
            const bool can_give = alloc[c][under] < static_cast<int>(std::ceil(quota[c][under]));
            if (can_take && can_give) {
                alloc[c][over] -= 1;
                alloc[c][under] += 1;
                moved = true;
            }
        }
        if (!moved) {
            // Fall back to the class with the most slack.
            size_t best = 0;
            for (size_t c = 1; c < n_classes; ++c) {
                if (alloc[c][over] > alloc[best][over]) best = c;
            }
            alloc[best][over] -= 1;
            alloc[best][under] += 1;
        }
    }
    return alloc;
}

struct SubjectGroups {
    // label -> shuffled list of subject ids; subjects map to their entries.
    std::vector<std::pair<Label, std::vector<std::string>>> by_class;
    std::map<std::string, std::vector<ManifestEntry>> entries_by_subject;
};

SubjectGroups group_subjects(const std::vector<ManifestEntry>& entries, uint64_t seed) {
    SubjectGroups g;
    std::map<std::string, Label> label_of;
    for (const auto& e : entries) {
        auto [it, inserted] = label_of.emplace(e.subject_id, e.label);
        if (!inserted && it->second != e.label) {
            throw StratificationError("subject " + e.subject_id + " has conflicting labels");
        }
        g.entries_by_subject[e.subject_id].push_back(e);
    }
    std::map<Label, std::vector<std::string>> buckets;
    for (const auto& [subject, label] : label_of) buckets[label].push_back(subject);
    for (auto& [label, subjects] : buckets) {
        std::sort(subjects.begin(), subjects.end());
        Rng rng(derive_seed(seed, "stratify:" + to_string(label)));
        rng.shuffle(subjects);
        g.by_class.emplace_back(label, subjects);
    }
    return g;
}

}  // namespace

SplitResult stratified_split(const std::vector<ManifestEntry>& entries,
                             const std::array<double, 3>& ratios, uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("stratified_split: ratios must sum to 1");
    if (entries.empty()) throw StratificationError("stratified_split: no entries");

    SubjectGroups groups = group_subjects(entries, seed);
    if (groups.by_class.size() < 2) {
        throw StratificationError("stratified_split: need both classes present");
    }
    std::vector<int> class_sizes;
    for (const auto& [label, subjects] : groups.by_class) {
        if (subjects.size() < 3) {
            throw StratificationError("stratified_split: class " + to_string(label) +
                                      " has fewer than 3 subjects");
        }
        class_sizes.push_back(static_cast<int>(subjects.size()));
    }

    const auto alloc =
        stratified_allocation(class_sizes, {ratios[0], ratios[1], ratios[2]});

    SplitResult result;
    std::vector<ManifestEntry>* parts[3] = {&result.train, &result.val, &result.test};
    for (size_t c = 0; c < groups.by_class.size(); ++c) {
        const auto& subjects = groups.by_class[c].second;
        size_t cursor = 0;
        for (size_t p = 0; p < 3; ++p) {
            for (int i = 0; i < alloc[c][p]; ++i, ++cursor) {
                for (const auto& e : groups.entries_by_subject[subjects[cursor]]) {
                    parts[p]->push_back(e);
                }
            }
        }
    }
    return result;
}

std::vector<std::vector<ManifestEntry>> stratified_kfold(const std::vector<ManifestEntry>& entries,
                                                         int k, uint64_t seed) {
    if (k < 2) throw ArgumentError("stratified_kfold: k must be at least 2");
    if (entries.empty()) throw StratificationError("stratified_kfold: no entries");

    SubjectGroups groups = group_subjects(entries, seed);
    if (groups.by_class.size() < 2) {
        throw StratificationError("stratified_kfold: need both classes present");
    }
    std::vector<int> class_sizes;
    for (const auto& [label, subjects] : groups.by_class) {
        if (static_cast<int>(subjects.size()) < k) {
            throw StratificationError("stratified_kfold: class " + to_string(label) +
                                      " has fewer than k subjects");
        }
        class_sizes.push_back(static_cast<int>(subjects.size()));
    }

    const auto alloc =
        stratified_allocation(class_sizes, std::vector<double>(k, 1.0 / k));

    std::vector<std::vector<ManifestEntry>> folds(k);
    for (size_t c = 0; c < groups.by_class.size(); ++c) {
        const auto& subjects = groups.by_class[c].second;
        size_t cursor = 0;
        for (int p = 0; p < k; ++p) {
            for (int i = 0; i < alloc[c][p]; ++i, ++cursor) {
                for (const auto& e : groups.entries_by_subject[subjects[cursor]]) {
                    folds[p].push_back(e);
                }
            }
        }
    }
    return folds;
}

FoldAssignment kfold_assignment(const std::vector<std::vector<ManifestEntry>>& folds, int round) {
    const int k = static_cast<int>(folds.size());
    if (k < 2) throw ArgumentError("kfold_assignment: need at least 2 folds");
    if (round < 0 || round >= k) throw ArgumentError("kfold_assignment: round out of range");
    FoldAssignment a;
    a.test_fold = round;
    a.val_fold = (round + 1) % k;
    a.test = folds[a.test_fold];
    a.val = folds[a.val_fold];
    for (int i = 0; i < k; ++i) {
        if (i == a.test_fold || i == a.val_fold) continue;
        a.train.insert(a.train.end(), folds[i].begin(), folds[i].end());
    }
    return a;
}

}  // namespace signal_io
}  // namespace cardioforge
