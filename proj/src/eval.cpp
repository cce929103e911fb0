#include "wtalc/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "wtalc/errors.hpp"

namespace wtalc {

double temporal_iou(Interval a, Interval b) {
  if (!(a.start < a.end) || !(b.start < b.end)) throw DomainError("temporal_iou: interval with start >= end");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  return inter / uni;
}

double average_precision(std::span<const bool> ranked_hits, std::size_t num_positives) {
  if (num_positives == 0) return 0.0;
  const std::size_t n = ranked_hits.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_hits[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope: max precision at any rank at or beyond i.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_hits[i]) ap += precision[i];
  }
  return ap / static_cast<double>(num_positives);
}

DetectionMap detection_map(std::span<const VideoDetection> detections,
                           std::span<const GroundTruthSegment> ground_truth,
                           std::span<const double> iou_thresholds, std::size_t num_classes) {
  DetectionMap out;
  out.thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());

  std::vector<std::vector<std::size_t>> dets_by_class(num_classes);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i].detection;
    if (d.class_index >= num_classes) throw DomainError("detection_map: detection class out of range");
    if (!(d.start < d.end)) throw DomainError("detection_map: detection with start >= end");
    dets_by_class[d.class_index].push_back(i);
  }
  for (auto& idx : dets_by_class) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& da = detections[a].detection;
      const auto& db = detections[b].detection;
      if (da.confidence != db.confidence) return da.confidence > db.confidence;
      return da.start < db.start;
    });
  }
  // class -> video -> ground-truth indices
  std::vector<std::map<std::string, std::vector<std::size_t>>> gt_by_class(num_classes);
  std::vector<std::size_t> gt_count(num_classes, 0);
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    const auto& s = ground_truth[g];
    if (s.class_index >= num_classes) throw DomainError("detection_map: ground-truth class out of range");
    if (!(s.start < s.end)) throw DomainError("detection_map: ground truth with start >= end");
    gt_by_class[s.class_index][s.video_id].push_back(g);
    ++gt_count[s.class_index];
  }

  for (double threshold : iou_thresholds) {
    std::vector<std::optional<double>> per_class(num_classes);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (gt_count[c] == 0) continue;
      std::vector<bool> matched(ground_truth.size(), false);
      auto hits = std::make_unique<bool[]>(dets_by_class[c].size());
      std::size_t rank = 0;
      for (std::size_t i : dets_by_class[c]) {
        const auto& det = detections[i];
        std::optional<std::size_t> best;
        double best_iou = -1.0;
        if (auto it = gt_by_class[c].find(det.video_id); it != gt_by_class[c].end()) {
          for (std::size_t g : it->second) {
            if (matched[g]) continue;
            const double iou = temporal_iou({det.detection.start, det.detection.end},
                                            {ground_truth[g].start, ground_truth[g].end});
            if (iou >= threshold && iou > best_iou) {
              best_iou = iou;
              best = g;
            }
          }
        }
        if (best) matched[*best] = true;
        hits[rank++] = best.has_value();
      }
      const double ap = average_precision(std::span<const bool>(hits.get(), rank), gt_count[c]);
      per_class[c] = ap;
      sum += ap;
      ++counted;
    }
    out.mean_ap.push_back(counted > 0 ? sum / static_cast<double>(counted) : 0.0);
    out.class_ap.push_back(std::move(per_class));
  }
  return out;
}

std::vector<double> activitynet_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

double mean_over_thresholds(const DetectionMap& result) {
  if (result.mean_ap.empty()) return 0.0;
  return std::accumulate(result.mean_ap.begin(), result.mean_ap.end(), 0.0) /
         static_cast<double>(result.mean_ap.size());
}

double classification_map(std::span<const Vector> pmfs, std::span<const LabelSet> labels) {
  if (pmfs.size() != labels.size()) throw ShapeError("classification_map: pmfs and labels differ in count");
  if (pmfs.empty()) return 0.0;
  const std::size_t n_c = pmfs.front().size();
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < n_c; ++c) {
    std::size_t positives = 0;
    for (const auto& l : labels) positives += std::binary_search(l.begin(), l.end(), c) ? 1 : 0;
    if (positives == 0) continue;
    std::vector<std::size_t> order(pmfs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pmfs[a][c] > pmfs[b][c]; });
    auto hits = std::make_unique<bool[]>(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& l = labels[order[r]];
      hits[r] = std::binary_search(l.begin(), l.end(), c);
    }
    sum += average_precision(std::span<const bool>(hits.get(), order.size()), positives);
    ++counted;
  }
  return counted > 0 ? sum / static_cast<double>(counted) : 0.0;
}

// ---------------------------------------------------------------------------

namespace {

double parse_double(const std::string& token, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw FormatError(where + ": expected a number, got '" + token + "'");
  }
  return v;
}

}  // namespace

std::vector<SegmentRecord> read_segment_file(const std::filesystem::path& path, bool with_confidence) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<SegmentRecord> out;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t expected = with_confidence ? 5 : 4;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.size() != expected) {
      throw FormatError(where + ": expected " + std::to_string(expected) + " fields, got " + std::to_string(tok.size()));
    }
    SegmentRecord r{tok[0], parse_double(tok[1], where), parse_double(tok[2], where), tok[3], 0.0};
    if (with_confidence) r.confidence = parse_double(tok[4], where);
    if (!(r.start < r.end)) throw FormatError(where + ": segment start must be before end");
    out.push_back(std::move(r));
  }
  return out;
}

void write_ground_truth(const std::filesystem::path& path, std::span<const GroundTruthSegment> segments,
                        const LabelVocabulary& vocabulary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  char buf[96];
  for (const auto& s : segments) {
    std::snprintf(buf, sizeof(buf), " %.6f %.6f ", s.start, s.end);
    out << s.video_id << buf << vocabulary.name(s.class_index) << '\n';
  }
}

std::vector<GroundTruthSegment> to_ground_truth(std::span<const SegmentRecord> records,
                                                const LabelVocabulary& vocabulary) {
  std::vector<GroundTruthSegment> out;
  for (const auto& r : records) out.push_back({r.video_id, r.start, r.end, vocabulary.index_of(r.class_name)});
  return out;
}

std::vector<VideoDetection> to_detections(std::span<const SegmentRecord> records, const LabelVocabulary& vocabulary) {
  std::vector<VideoDetection> out;
  for (const auto& r : records) {
    out.push_back({r.video_id, {r.start, r.end, vocabulary.index_of(r.class_name), r.confidence}});
  }
  return out;
}

std::string format_results_table(const DetectionMap& result, const LabelVocabulary& vocabulary) {
  std::ostringstream out;
  char buf[64];
  out << "IoU    mAP";
  for (const auto& name : vocabulary.names()) out << "  " << name;
  out << '\n';
  for (std::size_t i = 0; i < result.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.2f  %.4f", result.thresholds[i], result.mean_ap[i]);
    out << buf;
    for (const auto& ap : result.class_ap[i]) {
      if (ap) {
        std::snprintf(buf, sizeof(buf), "  %.4f", *ap);
        out << buf;
      } else {
        out << "  -";
      }
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof(buf), "avg   %.4f\n", mean_over_thresholds(result));
  out << buf;
  return out.str();
}

std::string format_results_kv(const DetectionMap& result, const LabelVocabulary& vocabulary) {
  std::ostringstream out;
  char buf[160];
  for (std::size_t i = 0; i < result.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "map@%.2f=%.6f\n", result.thresholds[i], result.mean_ap[i]);
    out << buf;
    for (std::size_t c = 0; c < result.class_ap[i].size(); ++c) {
      if (!result.class_ap[i][c]) continue;
      std::snprintf(buf, sizeof(buf), "ap@%.2f/%s=%.6f\n", result.thresholds[i], vocabulary.name(c).c_str(),
                    *result.class_ap[i][c]);
      out << buf;
    }
  }
  std::snprintf(buf, sizeof(buf), "map_avg=%.6f\n", mean_over_thresholds(result));
  out << buf;
  return out.str();
}

}  // namespace wtalc
