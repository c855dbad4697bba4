#include "stereoforge/timeline.hpp"

#include "stereoforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace stereoforge {

std::vector<SpeakerLabel> DiarizationAnnotation::speakers() const {
    std::vector<const SpeakerTurn*> order;
    order.reserve(entries.size());
    for (const auto& e : entries) order.push_back(&e);
    std::stable_sort(order.begin(), order.end(),
                     [](const SpeakerTurn* a, const SpeakerTurn* b) { return a->interval.start < b->interval.start; });
    std::vector<SpeakerLabel> out;
    for (const auto* e : order) {
        if (std::find(out.begin(), out.end(), e->speaker) == out.end()) out.push_back(e->speaker);
    }
    return out;
}

std::vector<SampleInterval> FrameClassification::solo_of(const SpeakerLabel& speaker) const {
    std::vector<SampleInterval> out;
    for (const auto& t : solo)
        if (t.speaker == speaker) out.push_back(t.interval);
    return out;
}

DiarizationAnnotation normalize_annotation(std::vector<SpeakerTurn> raw, int64_t total_len, int64_t merge_gap) {
    std::map<SpeakerLabel, std::vector<SampleInterval>> by_speaker;
    for (const auto& e : raw) {
        if (e.interval.end <= e.interval.start)
            throw Error(ErrorCode::MalformedAnnotation, "entry for '" + e.speaker + "' has end <= start");
        if (e.interval.start < 0 || e.interval.end > total_len)
            throw Error(ErrorCode::OutOfBounds, "entry for '" + e.speaker + "' [" + std::to_string(e.interval.start) +
                                                    ", " + std::to_string(e.interval.end) + ") exceeds length " +
                                                    std::to_string(total_len));
        by_speaker[e.speaker].push_back(e.interval);
    }

    DiarizationAnnotation out;
    out.total_len = total_len;
    for (auto& [speaker, ivs] : by_speaker) {
        std::sort(ivs.begin(), ivs.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
        SampleInterval cur = ivs.front();
        for (size_t i = 1; i < ivs.size(); ++i) {
            if (ivs[i].start <= cur.end || ivs[i].start - cur.end < merge_gap) {
                cur.end = std::max(cur.end, ivs[i].end);
            } else {
                out.entries.push_back({speaker, cur});
                cur = ivs[i];
            }
        }
        out.entries.push_back({speaker, cur});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const SpeakerTurn& a, const SpeakerTurn& b) {
        if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
        return a.speaker < b.speaker;
    });
    return out;
}

namespace {

// Maximal pieces of the timeline with a constant set of active speakers.
struct Piece {
    SampleInterval iv;
    std::vector<int> active;  // sorted speaker indices
};

std::vector<Piece> sweep(const DiarizationAnnotation& a, const std::vector<SpeakerLabel>& labels) {
    std::map<SpeakerLabel, int> index;
    for (size_t i = 0; i < labels.size(); ++i) index[labels[i]] = int(i);

    // +1 at start, -1 at end; counts per speaker tolerate unnormalized input.
    std::vector<std::tuple<int64_t, int, int>> events;
    events.reserve(a.entries.size() * 2);
    for (const auto& e : a.entries) {
        events.emplace_back(e.interval.start, index.at(e.speaker), +1);
        events.emplace_back(e.interval.end, index.at(e.speaker), -1);
    }
    std::sort(events.begin(), events.end());

    std::vector<int> count(labels.size(), 0);
    std::vector<Piece> out;
    int64_t t = 0;
    size_t k = 0;
    auto active = [&] {
        std::vector<int> act;
        for (size_t s = 0; s < count.size(); ++s)
            if (count[s] > 0) act.push_back(int(s));
        return act;
    };
    while (t < a.total_len) {
        while (k < events.size() && std::get<0>(events[k]) <= t) {
            count[size_t(std::get<1>(events[k]))] += std::get<2>(events[k]);
            ++k;
        }
        const int64_t next = k < events.size() ? std::min(std::get<0>(events[k]), a.total_len) : a.total_len;
        auto act = active();
        if (!out.empty() && out.back().active == act) {
            out.back().iv.end = next;
        } else {
            out.push_back({{t, next}, std::move(act)});
        }
        t = next;
    }
    return out;
}

size_t shared_count(const std::vector<int>& x, const std::vector<int>& y) {
    size_t n = 0;
    for (int v : x)
        if (std::find(y.begin(), y.end(), v) != y.end()) ++n;
    return n;
}

} // namespace

FrameClassification classify_frames(const DiarizationAnnotation& annotation) {
    const auto labels = annotation.speakers();
    if (labels.size() != 2)
        throw Error(ErrorCode::SpeakerCountError,
                    "expected exactly 2 speakers, found " + std::to_string(labels.size()));
    FrameClassification fc;
    fc.speakers = {labels[0], labels[1]};
    fc.total_len = annotation.total_len;
    for (const auto& p : sweep(annotation, labels)) {
        switch (p.active.size()) {
            case 0: fc.silence.push_back(p.iv); break;
            case 1: fc.solo.push_back({labels[size_t(p.active[0])], p.iv}); break;
            default: fc.overlap.push_back(p.iv); break;
        }
    }
    return fc;
}

DiarizationAnnotation rebase(const DiarizationAnnotation& annotation, const SampleInterval& window) {
    DiarizationAnnotation out;
    out.total_len = window.length();
    for (const auto& e : annotation.entries) {
        const int64_t s = std::max(e.interval.start, window.start);
        const int64_t t = std::min(e.interval.end, window.end);
        if (t > s) out.entries.push_back({e.speaker, {s - window.start, t - window.start}});
    }
    return out;
}

std::vector<DialogueWindow> build_windows(const DiarizationAnnotation& annotation, const TimelineParams& params) {
    std::vector<DialogueWindow> windows;
    if (annotation.entries.empty() || annotation.total_len <= 0) return windows;
    const auto labels = annotation.speakers();
    const auto pieces = sweep(annotation, labels);
    const size_t n = pieces.size();

    // Boundary k is the start of piece k (k == n is the end of the recording). It is unsafe
    // when two speakers stay active across it, i.e. it would cut an overlap in two.
    auto unsafe = [&](size_t k) {
        return k > 0 && k < n && shared_count(pieces[k - 1].active, pieces[k].active) >= 2;
    };
    auto boundary = [&](size_t k) { return k < n ? pieces[k].iv.start : annotation.total_len; };

    struct Region {
        SampleInterval iv;
        std::vector<int> speakers;
    };
    std::vector<Region> regions;

    size_t i = 0;
    std::vector<int> set;
    bool open = false;
    size_t first = 0, last_active = 0;
    auto close = [&] {
        if (!open) return;
        size_t k = last_active + 1;
        while (k > first && unsafe(k)) --k;
        if (k > first) regions.push_back({{boundary(first), boundary(k)}, set});
        open = false;
        set.clear();
    };

    while (i < n) {
        const auto& p = pieces[i];
        if (p.active.empty()) {
            ++i;
            continue;
        }
        std::vector<int> merged = set;
        for (int s : p.active)
            if (std::find(merged.begin(), merged.end(), s) == merged.end()) merged.push_back(s);
        if (merged.size() <= 2) {
            if (!open) {
                if (unsafe(i)) {
                    ++i;
                    continue;
                }
                open = true;
                first = i;
            }
            set = std::move(merged);
            last_active = i;
            ++i;
            continue;
        }
        // A speaker outside the current pair appears: drop everything until that speaker's
        // activity (and any >= 3-way overlap) has ended, then start over.
        std::vector<int> intruders;
        for (int s : p.active)
            if (std::find(set.begin(), set.end(), s) == set.end()) intruders.push_back(s);
        close();
        size_t j = i;
        while (j < n && (shared_count(pieces[j].active, intruders) > 0 || pieces[j].active.size() >= 3)) ++j;
        i = j;
    }
    close();

    auto emit = [&](SampleInterval w) {
        auto local = rebase(annotation, w);
        if (local.speakers().size() != 2) return;
        windows.push_back({w, std::move(local)});
    };

    auto piece_at = [&](int64_t t) {
        auto it = std::upper_bound(pieces.begin(), pieces.end(), t,
                                   [](int64_t v, const Piece& p) { return v < p.iv.start; });
        return size_t(std::distance(pieces.begin(), it) - 1);
    };

    for (const auto& r : regions) {
        if (r.speakers.size() != 2) continue;
        int64_t cursor = r.iv.start;
        while (r.iv.end - cursor >= params.min_len) {
            if (r.iv.end - cursor <= params.max_len) {
                emit({cursor, r.iv.end});
                break;
            }
            const int64_t target = cursor + params.max_len;
            const size_t k = piece_at(target);
            int64_t cut = target;
            if (!pieces[k].active.empty() && pieces[k].iv.start != target) {
                size_t b = k;
                while (unsafe(b)) --b;
                const int64_t snapped = boundary(b);
                const bool in_overlap = pieces[k].active.size() >= 2 || b != k;
                if (target - snapped <= params.cut_slack || in_overlap) cut = snapped;
            } else if (unsafe(k) && pieces[k].iv.start == target) {
                size_t b = k;
                while (unsafe(b)) --b;
                cut = boundary(b);
            }
            if (cut <= cursor) {
                // The whole span is one overlap run; skip past it.
                size_t b = k + 1;
                while (unsafe(b)) ++b;
                cursor = boundary(b);
                continue;
            }
            if (cut - cursor >= params.min_len) emit({cursor, cut});
            cursor = cut;
        }
    }
    return windows;
}

int64_t seconds_to_samples(double seconds, int sample_rate) {
    return int64_t(std::floor(seconds * sample_rate + 0.5));
}

std::vector<SpeakerTurn> parse_annotation(std::istream& in, int sample_rate) {
    std::vector<SpeakerTurn> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() != 3 || fields[2].empty())
            throw Error(ErrorCode::MalformedAnnotation, "line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
        double s = 0.0, e = 0.0;
        try {
            size_t used = 0;
            s = std::stod(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing");
            e = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error(ErrorCode::MalformedAnnotation, "line " + std::to_string(lineno) + ": bad time value");
        }
        if (s < 0.0 || !(e > s))
            throw Error(ErrorCode::MalformedAnnotation, "line " + std::to_string(lineno) + ": need 0 <= start < end");
        const SampleInterval iv{seconds_to_samples(s, sample_rate), seconds_to_samples(e, sample_rate)};
        if (iv.end > iv.start) out.push_back({fields[2], iv});
    }
    return out;
}

std::vector<SpeakerTurn> read_annotation(const std::filesystem::path& path, int sample_rate) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return parse_annotation(in, sample_rate);
}

void write_annotation(std::ostream& out, const DiarizationAnnotation& annotation, int sample_rate) {
    char buf[64];
    for (const auto& e : annotation.entries) {
        std::snprintf(buf, sizeof buf, "%.6f\t%.6f\t", double(e.interval.start) / sample_rate,
                      double(e.interval.end) / sample_rate);
        out << buf << e.speaker << '\n';
    }
}

void write_annotation(const std::filesystem::path& path, const DiarizationAnnotation& annotation, int sample_rate) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
    write_annotation(out, annotation, sample_rate);
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

} // namespace stereoforge
