#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "core/csvio.hpp"
#include "core/rng.hpp"

namespace faceqr {

namespace {

constexpr int kEmbedSize = 8;

std::vector<double> embed(const FaceImage& face) {
  std::vector<double> small = resize_bilinear(face.values, FaceImage::kSize, FaceImage::kSize,
                                              FaceImage::kChannels, kEmbedSize, kEmbedSize);
  double mean = 0.0;
  for (double v : small) mean += v;
  mean /= static_cast<double>(small.size());
  double var = 0.0;
  for (double& v : small) {
    v -= mean;
    var += v * v;
  }
  var /= static_cast<double>(small.size());
  double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : small) v *= inv_std;
  return small;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> sorted_mated(const std::vector<VerificationPair>& pairs) {
  std::vector<double> s;
  for (const VerificationPair& p : pairs)
    if (p.mated) s.push_back(p.similarity);
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

Comparator default_comparator() {
  return [](const FaceImage& a, const FaceImage& b) { return cosine(embed(a), embed(b)); };
}

std::vector<VerificationPair> build_pairs(const DatasetManifest& manifest,
                                          int n_nonmated_per_image, std::uint64_t seed) {
  require(n_nonmated_per_image >= 0, ErrorCode::invalid_argument,
          "n_nonmated_per_image must be >= 0");
  require(manifest.subjects.size() >= 2 || n_nonmated_per_image == 0,
          ErrorCode::invalid_argument,
          "non-mated pairs need at least two subjects in the manifest");

  std::vector<VerificationPair> pairs;

  // All within-subject pairs over [anchor, variants...], in manifest order.
  for (const SubjectRecord& rec : manifest.subjects) {
    std::vector<std::string> ids;
    ids.push_back(rec.anchor);
    for (const std::string& v : rec.variants) ids.push_back(v);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size(); ++j)
        pairs.push_back({ids[i], ids[j], true, 0.0});
  }

  if (n_nonmated_per_image > 0) {
    Rng rng(Rng::splitmix(seed ^ 0x9a1250a1ULL));
    const std::size_t n_subjects = manifest.subjects.size();
    for (std::size_t si = 0; si < n_subjects; ++si) {
      const SubjectRecord& rec = manifest.subjects[si];
      std::vector<std::string> ids;
      ids.push_back(rec.anchor);
      for (const std::string& v : rec.variants) ids.push_back(v);
      for (const std::string& id : ids) {
        for (int k = 0; k < n_nonmated_per_image; ++k) {
          std::size_t other = rng.uniform_int(n_subjects - 1);
          if (other >= si) ++other;
          const SubjectRecord& orec = manifest.subjects[other];
          std::size_t pick = rng.uniform_int(orec.variants.size() + 1);
          const std::string& oid = pick == 0 ? orec.anchor : orec.variants[pick - 1];
          pairs.push_back({id, oid, false, 0.0});
        }
      }
    }
  }
  return pairs;
}

void compute_similarities(std::vector<VerificationPair>& pairs,
                          const std::map<std::string, FaceImage>& images,
                          const Comparator& comparator) {
  for (VerificationPair& p : pairs) {
    auto a = images.find(p.id_a);
    auto b = images.find(p.id_b);
    require(a != images.end(), ErrorCode::invalid_argument,
            "no image loaded for pair member: " + p.id_a);
    require(b != images.end(), ErrorCode::invalid_argument,
            "no image loaded for pair member: " + p.id_b);
    p.similarity = comparator(a->second, b->second);
  }
}

void write_similarity_csv(const std::vector<VerificationPair>& pairs,
                          const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(pairs.size());
  for (const VerificationPair& p : pairs)
    rows.push_back({p.id_a, p.id_b, p.mated ? "1" : "0", format_double(p.similarity)});
  write_csv(path, {"id_a", "id_b", "mated", "similarity"}, rows);
}

std::vector<VerificationPair> read_similarity_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  int a = table.column("id_a"), b = table.column("id_b");
  int m = table.column("mated"), s = table.column("similarity");
  require(a >= 0 && b >= 0 && m >= 0 && s >= 0, ErrorCode::format,
          "similarity CSV must have columns id_a,id_b,mated,similarity");
  std::vector<VerificationPair> pairs;
  pairs.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    VerificationPair p;
    p.id_a = row[static_cast<std::size_t>(a)];
    p.id_b = row[static_cast<std::size_t>(b)];
    const std::string& mated = row[static_cast<std::size_t>(m)];
    require(mated == "0" || mated == "1", ErrorCode::format,
            "similarity CSV mated column must be 0 or 1");
    p.mated = mated == "1";
    p.similarity = parse_double(row[static_cast<std::size_t>(s)], "similarity CSV");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

CalibratedThreshold calibrate_threshold(const std::vector<double>& mated_similarities,
                                        double target_fnmr) {
  require(!mated_similarities.empty(), ErrorCode::invalid_argument,
          "cannot calibrate a threshold from an empty similarity list");
  require(target_fnmr > 0.0 && target_fnmr < 1.0, ErrorCode::invalid_argument,
          "target_fnmr must lie in (0,1)");
  std::vector<double> s = mated_similarities;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());

  // Candidate thresholds are the observed values; fraction{x < s[i]} = i/n
  // after dedup. Pick the largest achievable fraction <= target, then the
  // smallest threshold realizing it.
  CalibratedThreshold best{s.front(), 0.0};
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    double achieved = static_cast<double>(i) / n;
    if (achieved <= target_fnmr && achieved >= best.achieved_fnmr) {
      if (achieved > best.achieved_fnmr || s[i] < best.threshold)
        best = {s[i], achieved};
    }
    i = j;
  }
  return best;
}

ErcCurve compute_erc(const std::vector<VerificationPair>& pairs,
                     const std::map<std::string, double>& image_qualities, double threshold,
                     const std::vector<double>& fractions) {
  require(!pairs.empty(), ErrorCode::invalid_argument, "compute_erc needs pairs");
  for (double r : fractions)
    require(r >= 0.0 && r < 1.0, ErrorCode::invalid_argument,
            "rejection fractions must lie in [0,1)");
  for (std::size_t i = 1; i < fractions.size(); ++i)
    require(fractions[i] > fractions[i - 1], ErrorCode::invalid_argument,
            "rejection fractions must be strictly increasing");

  std::string missing;
  for (const VerificationPair& p : pairs) {
    if (!image_qualities.count(p.id_a)) missing += (missing.empty() ? "" : ", ") + p.id_a;
    if (!image_qualities.count(p.id_b)) missing += (missing.empty() ? "" : ", ") + p.id_b;
    if (missing.size() > 300) break;
  }
  require(missing.empty(), ErrorCode::invalid_argument,
          "pairs reference images with no quality entry: " + missing);

  // Ascending by (quality, id): the first floor(r*n) entries are rejected.
  std::vector<std::pair<double, std::string>> order;
  order.reserve(image_qualities.size());
  for (const auto& [id, q] : image_qualities) order.emplace_back(q, id);
  std::sort(order.begin(), order.end());

  auto fnmr_with_rejected = [&](std::size_t n_rejected) {
    std::set<std::string> rejected;
    for (std::size_t i = 0; i < n_rejected; ++i) rejected.insert(order[i].second);
    std::size_t survivors = 0, failures = 0;
    for (const VerificationPair& p : pairs) {
      if (!p.mated) continue;
      if (rejected.count(p.id_a) || rejected.count(p.id_b)) continue;
      ++survivors;
      if (p.similarity < threshold) ++failures;
    }
    if (survivors == 0) return 0.0;
    return static_cast<double>(failures) / static_cast<double>(survivors);
  };

  ErcCurve curve;
  curve.threshold = threshold;
  curve.initial_fnmr = fnmr_with_rejected(0);
  curve.fractions = fractions;
  for (double r : fractions) {
    std::size_t n_rejected =
        static_cast<std::size_t>(std::floor(r * static_cast<double>(order.size())));
    curve.fnmr.push_back(fnmr_with_rejected(n_rejected));
  }
  return curve;
}

ErcCurve perfect_curve(double initial_fnmr, const std::vector<double>& fractions) {
  require(initial_fnmr >= 0.0 && initial_fnmr <= 1.0, ErrorCode::invalid_argument,
          "initial_fnmr must lie in [0,1]");
  ErcCurve curve;
  curve.initial_fnmr = initial_fnmr;
  curve.fractions = fractions;
  for (double r : fractions) curve.fnmr.push_back(std::max(initial_fnmr - r, 0.0));
  return curve;
}

DetCurve compute_det(const std::vector<VerificationPair>& pairs,
                     const std::vector<double>& thresholds) {
  std::size_t mated = 0, nonmated = 0;
  for (const VerificationPair& p : pairs) (p.mated ? mated : nonmated) += 1;
  require(mated > 0, ErrorCode::invalid_argument, "compute_det needs mated pairs");
  require(nonmated > 0, ErrorCode::invalid_argument, "compute_det needs non-mated pairs");

  DetCurve curve;
  curve.thresholds = thresholds;
  for (double t : thresholds) {
    std::size_t fn = 0, fm = 0;
    for (const VerificationPair& p : pairs) {
      if (p.mated) {
        if (p.similarity < t) ++fn;
      } else {
        if (p.similarity >= t) ++fm;
      }
    }
    curve.fnmr.push_back(static_cast<double>(fn) / static_cast<double>(mated));
    curve.fmr.push_back(static_cast<double>(fm) / static_cast<double>(nonmated));
  }
  return curve;
}

std::vector<double> det_threshold_sweep(const std::vector<VerificationPair>& pairs) {
  require(!pairs.empty(), ErrorCode::invalid_argument, "det_threshold_sweep needs pairs");
  std::set<double> values;
  for (const VerificationPair& p : pairs) values.insert(p.similarity);
  std::vector<double> thresholds(values.begin(), values.end());
  thresholds.push_back(std::nextafter(thresholds.back(), std::numeric_limits<double>::max()));
  return thresholds;
}

double equal_error_rate(const std::vector<VerificationPair>& pairs) {
  DetCurve curve = compute_det(pairs, det_threshold_sweep(pairs));
  double best_gap = std::numeric_limits<double>::max();
  double eer = 1.0;
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    double gap = std::abs(curve.fnmr[i] - curve.fmr[i]);
    if (gap < best_gap) {
      best_gap = gap;
      eer = 0.5 * (curve.fnmr[i] + curve.fmr[i]);
    }
  }
  return eer;
}

std::vector<std::vector<std::string>> bin_by_quality(
    const std::map<std::string, double>& image_qualities, int k) {
  require(k >= 1, ErrorCode::invalid_argument, "bin count must be >= 1");
  require(static_cast<std::size_t>(k) <= image_qualities.size(), ErrorCode::invalid_argument,
          "more bins than images");
  std::vector<std::pair<double, std::string>> order;
  order.reserve(image_qualities.size());
  for (const auto& [id, q] : image_qualities) order.emplace_back(q, id);
  std::sort(order.begin(), order.end());

  const std::size_t n = order.size();
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t remainder = n % static_cast<std::size_t>(k);
  std::vector<std::vector<std::string>> groups;
  std::size_t pos = 0;
  for (int g = 0; g < k; ++g) {
    std::size_t size = base + (static_cast<std::size_t>(g) < remainder ? 1 : 0);
    std::vector<std::string> group;
    for (std::size_t i = 0; i < size; ++i) group.push_back(order[pos++].second);
    groups.push_back(std::move(group));
  }
  return groups;
}

}  // namespace faceqr
