// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "snp/importance.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "snp/errors.hpp"
#include "snp/linalg.hpp"
#include "snp/parallel.hpp"

namespace snp {

using nlohmann::json;

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::kSnp: return "snp";
    case Criterion::kL2: return "l2";
    case Criterion::kGm: return "gm";
    case Criterion::kReverseSnp: return "reverse";
  }
  return "unknown";
}

Criterion criterion_from_string(std::string_view s) {
  if (s == "snp") return Criterion::kSnp;
  if (s == "l2") return Criterion::kL2;
  if (s == "gm") return Criterion::kGm;
  if (s == "reverse") return Criterion::kReverseSnp;
  throw ArgumentError("unknown criterion '" + std::string(s) + "' (expected snp, l2, gm, reverse)");
}

const GroupScores* ImportanceTable::find(const GroupId& id) const {
  for (const auto& g : groups) {
    if (g.id == id) return &g;
  }
  return nullptr;
}

namespace {

constexpr double kZeroNorm = 1e-12;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Σ_{l≠i} (1 − |cos(row_i, row_l)|) for every row. Pairwise values are
// computed once into a dense matrix, then each row is summed in index
// order, so the result does not depend on the worker count.
std::vector<double> diversity_rows(const std::vector<const float*>& rows, std::size_t dim,
                                   std::size_t workers) {
  const std::size_t n = rows.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(kernels::dot1(rows[i], rows[i], dim));
  std::vector<double> abs_cos(n * n, 0.0);
  auto cos_of = [&](std::size_t i, std::size_t l, double d) {
    if (norms[i] < kZeroNorm || norms[l] < kZeroNorm) return 0.0;
    return std::min(1.0, std::abs(d / (norms[i] * norms[l])));
  };
  parallel_for(n, workers, [&](std::size_t i) {
    std::size_t l = i + 1;
    for (; l + 4 <= n; l += 4) {
      double out[4];
      kernels::dot4(rows[i], rows[l], rows[l + 1], rows[l + 2], rows[l + 3], dim, out);
      for (int t = 0; t < 4; ++t) abs_cos[i * n + l + t] = cos_of(i, l + t, out[t]);
    }
    for (; l < n; ++l) abs_cos[i * n + l] = cos_of(i, l, kernels::dot1(rows[i], rows[l], dim));
  });
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == i) continue;
      const double c = l > i ? abs_cos[i * n + l] : abs_cos[l * n + i];
      s += 1.0 - c;
    }
    scores[i] = s;
  }
  return scores;
}

std::vector<const float*> row_pointers(const Tensor& w) {
  std::vector<const float*> rows(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) rows[r] = w.row(r).data();
  return rows;
}

std::vector<double> diversity(const Tensor& w, std::size_t workers) {
  if (w.rank() != 2) throw DimensionError("diversity expects a weight matrix, got " + shape_str(w.shape()));
  return diversity_rows(row_pointers(w), w.cols(), workers);
}

std::vector<std::vector<double>> value_scores(const ModelBundle& model, std::size_t block,
                                              std::size_t workers) {
  const BlockConfig& bc = model.config.blocks.at(block);
  std::vector<const float*> rows;
  for (std::size_t h = 0; h < bc.heads; ++h) {
    auto r = row_pointers(model.at(names::v_weight(block, h)));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const auto flat = diversity_rows(rows, model.config.embed_dim, workers);
  std::vector<std::vector<double>> out(bc.heads);
  for (std::size_t h = 0; h < bc.heads; ++h) {
    out[h].assign(flat.begin() + h * bc.v_dim, flat.begin() + (h + 1) * bc.v_dim);
  }
  return out;
}

std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

std::size_t resolve_rank(std::size_t rank, std::size_t tokens) {
  const std::size_t r = rank == 0 ? tokens : rank;
  if (r < 1 || r > tokens) {
    throw ArgumentError("rank r=" + std::to_string(rank) + " outside [1, " + std::to_string(tokens) + "]");
  }
  return r;
}

}  // namespace

std::vector<double> qk_importance_single(const AttentionCapture& capture, std::size_t block,
                                         std::size_t head, std::size_t rank) {
  const HeadCapture& hc = capture.at(block, head);
  const std::size_t n = hc.scores.rows();
  const std::size_t r = resolve_rank(rank, n);
  const std::size_t width = hc.query.cols();

  std::vector<double> scores_buf(hc.scores.data().begin(), hc.scores.data().end());
  const SvdResult64 dec = svd64(scores_buf, n);
  std::vector<double> u_norm(r), v_norm(r);
  for (std::size_t j = 0; j < r; ++j) {
    u_norm[j] = norm2(dec.u_col(j));
    v_norm[j] = norm2(dec.v_col(j));
  }

  const double scale = capture.scales.at(block);
  std::vector<double> out(width, 0.0);
  std::vector<double> q(n), k(n);
  for (std::size_t i = 0; i < width; ++i) {
    for (std::size_t t = 0; t < n; ++t) {
      q[t] = hc.query(t, i);
      k[t] = hc.key(t, i);
    }
    // ‖scale·q·kᵀ‖_F = scale·‖q‖·‖k‖ and ⟨q·kᵀ, u·vᵀ⟩_F = (q·u)(k·v).
    const double qn = norm2(q), kn = norm2(k);
    if (scale * qn * kn < kZeroNorm) continue;
    double score = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double comp_norm = dec.s[j] * u_norm[j] * v_norm[j];
      if (comp_norm < kZeroNorm) continue;
      const double c = dot(dec.u_col(j), q) * dot(dec.v_col(j), k) / (qn * kn * u_norm[j] * v_norm[j]);
      score += std::min(1.0, std::abs(c));
    }
    out[i] = score;
  }
  return out;
}

std::vector<double> qk_importance(std::span<const AttentionCapture> captures, std::size_t block,
                                  std::size_t head, std::size_t rank) {
  if (captures.empty()) throw ArgumentError("qk_importance: empty calibration set");
  std::vector<double> acc;
  for (const auto& cap : captures) {
    auto s = qk_importance_single(cap, block, head, rank);
    if (acc.empty()) {
      acc = std::move(s);
    } else {
      acc = add(std::move(acc), s);
    }
  }
  for (double& v : acc) v /= static_cast<double>(captures.size());
  return acc;
}

std::vector<std::vector<double>> value_importance(const ModelBundle& model, std::size_t block) {
  if (block >= model.config.depth()) throw DimensionError("block index out of range");
  return value_scores(model, block, 1);
}

std::vector<double> layer_diversity_importance(const Tensor& w) { return diversity(w, 1); }

std::vector<double> residual_aggregate(std::span<const std::vector<double>> producers) {
  if (producers.empty()) throw DimensionError("residual_aggregate: no producers");
  std::vector<double> out(producers.front().size(), 0.0);
  for (const auto& p : producers) {
    if (p.size() != out.size()) {
      throw DimensionError("residual_aggregate: producer length " + std::to_string(p.size()) +
                           " differs from " + std::to_string(out.size()));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  return out;
}

std::vector<double> head_importance(const ModelBundle& model, std::size_t block) {
  const auto per_head = value_importance(model, block);
  std::vector<double> out;
  for (const auto& scores : per_head) {
    double s = 0.0;
    for (double v : scores) s += v;
    out.push_back(s);
  }
  return out;
}

std::vector<double> row_l2_norms(const Tensor& w) {
  std::vector<double> out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    out[r] = std::sqrt(kernels::dot1(row.data(), row.data(), row.size()));
  }
  return out;
}

std::vector<const Tensor*> residual_producers(const ModelBundle& model) {
  std::vector<const Tensor*> out{&model.at(names::patch_weight())};
  for (std::size_t b = 0; b < model.config.depth(); ++b) {
    out.push_back(&model.at(names::proj_weight(b)));
    out.push_back(&model.at(names::fc2_weight(b)));
  }
  return out;
}

namespace {

// QK scores for every (block, head), averaged over the images.
std::vector<std::vector<double>> snp_qk_scores(const ModelBundle& model,
                                               std::span<const Tensor> images, std::size_t rank,
                                               std::size_t workers) {
  const ModelConfig& c = model.config;
  std::vector<std::pair<std::size_t, std::size_t>> heads;
  for (std::size_t b = 0; b < c.depth(); ++b) {
    for (std::size_t h = 0; h < c.blocks[b].heads; ++h) heads.emplace_back(b, h);
  }
  std::vector<std::vector<double>> acc(heads.size());
  const std::size_t chunk = std::max<std::size_t>(workers, 1);
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t count = std::min(chunk, images.size() - start);
    std::vector<AttentionCapture> caps(count);
    parallel_for(count, workers, [&](std::size_t i) {
      caps[i] = std::move(*forward(model, images[start + i], {.capture = true}).capture);
    });
    std::vector<std::vector<double>> per(count * heads.size());
    parallel_for(per.size(), workers, [&](std::size_t t) {
      const auto [b, h] = heads[t % heads.size()];
      per[t] = qk_importance_single(caps[t / heads.size()], b, h, rank);
    });
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t g = 0; g < heads.size(); ++g) {
        auto& s = per[i * heads.size() + g];
        acc[g] = acc[g].empty() ? std::move(s) : add(std::move(acc[g]), s);
      }
    }
  }
  for (auto& v : acc) {
    for (double& x : v) x /= static_cast<double>(images.size());
  }
  return acc;
}

}  // namespace

ImportanceTable compute_importance(Criterion criterion, const ModelBundle& model,
                                   std::span<const Tensor> images, std::size_t rank,
                                   std::size_t workers) {
  const ModelConfig& c = model.config;
  ImportanceTable table;
  table.fingerprint = fingerprint(model);
  table.criterion = criterion;

  const bool needs_calibration = criterion == Criterion::kSnp || criterion == Criterion::kReverseSnp;
  std::vector<std::vector<double>> qk;
  if (needs_calibration) {
    if (images.empty()) throw ArgumentError("empty calibration set");
    table.rank = resolve_rank(rank, c.num_tokens());
    table.images = images.size();
    qk = snp_qk_scores(model, images, *table.rank, workers);
  }

  const bool use_l2 = criterion == Criterion::kL2;
  auto layer_scores = [&](const Tensor& w) { return use_l2 ? row_l2_norms(w) : diversity(w, workers); };

  std::size_t qk_index = 0;
  for (const PruneGroup& g : build_groups(c)) {
    std::vector<double> scores;
    switch (g.id.kind) {
      case GroupKind::kQkPair: {
        const std::size_t b = *g.id.block, h = *g.id.head;
        if (needs_calibration) {
          scores = qk[qk_index++];
        } else {
          scores = add(layer_scores(model.at(names::q_weight(b, h))),
                       layer_scores(model.at(names::k_weight(b, h))));
        }
        break;
      }
      case GroupKind::kValue: {
        const std::size_t b = *g.id.block, h = *g.id.head;
        if (criterion == Criterion::kGm || use_l2) {
          scores = layer_scores(model.at(names::v_weight(b, h)));
        } else {
          scores = value_scores(model, b, workers)[h];
        }
        break;
      }
      case GroupKind::kFfnHidden:
        scores = layer_scores(model.at(names::fc1_weight(*g.id.block)));
        break;
      case GroupKind::kEmbedResidual: {
        std::vector<std::vector<double>> per;
        for (const Tensor* w : residual_producers(model)) per.push_back(layer_scores(*w));
        scores = residual_aggregate(per);
        break;
      }
    }
    if (criterion == Criterion::kReverseSnp) {
      for (double& s : scores) s = -s;
    }
    table.groups.push_back({g.id, std::move(scores)});
  }
  return table;
}

json table_to_json(const ImportanceTable& t) {
  json groups = json::array();
  for (const auto& g : t.groups) {
    json e = group_id_to_json(g.id);
    e["scores"] = g.scores;
    groups.push_back(std::move(e));
  }
  json j = {{"fingerprint", t.fingerprint}, {"criterion", to_string(t.criterion)},
            {"r", nullptr},                 {"images", t.images},
            {"reduction", t.reduction},     {"groups", groups}};
  if (t.rank) j["r"] = *t.rank;
  return j;
}

ImportanceTable table_from_json(const json& j) {
  try {
    ImportanceTable t;
    t.fingerprint = j.at("fingerprint").get<std::string>();
    t.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    if (!j.at("r").is_null()) t.rank = j.at("r").get<std::size_t>();
    t.images = j.at("images").get<std::size_t>();
    t.reduction = j.value("reduction", std::string("mean"));
    for (const auto& g : j.at("groups")) {
      t.groups.push_back({group_id_from_json(g), g.at("scores").get<std::vector<double>>()});
    }
    return t;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed importance table: ") + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("malformed importance table: ") + e.what());
  }
}

}  // namespace snp
