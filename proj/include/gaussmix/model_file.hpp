#pragma once

// JSON model file.
//
//   {
//     "format_version": 1,
//     "n_elements": N,
//     "elements": [ {"w": w, "mu": [x1, x2], "A": [[a11, a12], [a21, a22]]}, ... ],
//     "provenance": {                       // optional, every member optional
//       "source_dims": [H, W],
//       "fit_config": {...},
//       "final_losses": {"l2": ..., "pae": ..., "total": ...},
//       "raw_theta": [...]
//     }
//   }
//
// Doubles are written in shortest round-trip form, so load(save(m)) == m bit for bit.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaussmix/errors.hpp"
#include "gaussmix/fit.hpp"
#include "gaussmix/model.hpp"

namespace gaussmix {

inline constexpr int kModelFormatVersion = 1;

/// Fit metadata. The source image size lives on MixtureModel::source_dims but is
/// stored inside the "provenance" object on disk.
struct Provenance {
  std::optional<FitConfig> fit_config;
  std::optional<LossBreakdown> final_losses;
  std::optional<std::vector<double>> raw_theta;
};

struct ModelFile {
  int format_version = kModelFormatVersion;
  MixtureModel model;
  std::optional<Provenance> provenance;
};

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw FormatError(std::string("model file: non-finite ") + what);
}

inline double get_number(const ordered_json& j, const char* what) {
  if (!j.is_number()) throw FormatError(std::string("model file: ") + what + " must be a number");
  return j.get<double>();
}

inline std::size_t get_count(const ordered_json& j, const char* what) {
  if (!j.is_number_unsigned()) {
    throw FormatError(std::string("model file: ") + what + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

inline const ordered_json& member(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(std::string("model file: missing '") + key + "'");
  return *it;
}

inline ordered_json config_to_json(const FitConfig& c) {
  ordered_json j;
  j["n_elements"] = c.n_elements;
  j["alpha"] = c.alpha;
  j["learning_rate"] = c.learning_rate;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["max_iters"] = c.max_iters;
  j["seed"] = c.seed;
  j["convergence_tol"] = c.convergence_tol;
  j["convergence_window"] = c.convergence_window;
  return j;
}

inline FitConfig config_from_json(const ordered_json& j) {
  if (!j.is_object()) throw FormatError("model file: fit_config must be an object");
  FitConfig c;
  c.n_elements = get_count(member(j, "n_elements"), "n_elements");
  c.alpha = get_number(member(j, "alpha"), "alpha");
  c.learning_rate = get_number(member(j, "learning_rate"), "learning_rate");
  c.adam_beta1 = get_number(member(j, "adam_beta1"), "adam_beta1");
  c.adam_beta2 = get_number(member(j, "adam_beta2"), "adam_beta2");
  c.adam_epsilon = get_number(member(j, "adam_epsilon"), "adam_epsilon");
  c.max_iters = get_count(member(j, "max_iters"), "max_iters");
  const auto& seed = member(j, "seed");
  if (!seed.is_number_unsigned()) throw FormatError("model file: seed must be an unsigned integer");
  c.seed = seed.get<std::uint64_t>();
  c.convergence_tol = get_number(member(j, "convergence_tol"), "convergence_tol");
  c.convergence_window = get_count(member(j, "convergence_window"), "convergence_window");
  return c;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ModelFile& file) {
  using detail::ordered_json;
  using detail::require_finite;
  ordered_json j;
  j["format_version"] = file.format_version;
  j["n_elements"] = file.model.n_elements();
  ordered_json elements = ordered_json::array();
  for (const auto& e : file.model.elements) {
    const Mat2& a = e.precision;
    for (double v : {e.weight, e.center.x1, e.center.x2, a.a11, a.a12, a.a21, a.a22}) {
      require_finite(v, "element parameter");
    }
    if (!a.symmetric()) throw FormatError("model file: precision matrix is not symmetric");
    ordered_json el;
    el["w"] = e.weight;
    el["mu"] = {e.center.x1, e.center.x2};
    el["A"] = {{a.a11, a.a12}, {a.a21, a.a22}};
    elements.push_back(std::move(el));
  }
  j["elements"] = std::move(elements);

  const std::optional<ImageDims>& dims = file.model.source_dims;
  if (file.provenance || dims) {
    ordered_json prov = ordered_json::object();
    if (dims) prov["source_dims"] = {dims->height, dims->width};
    if (file.provenance) {
      const Provenance& p = *file.provenance;
      if (p.fit_config) prov["fit_config"] = detail::config_to_json(*p.fit_config);
      if (p.final_losses) {
        for (double v : {p.final_losses->l2, p.final_losses->pae, p.final_losses->total}) {
          require_finite(v, "loss");
        }
        prov["final_losses"] = {{"l2", p.final_losses->l2},
                                {"pae", p.final_losses->pae},
                                {"total", p.final_losses->total}};
      }
      if (p.raw_theta) {
        for (double v : *p.raw_theta) require_finite(v, "raw parameter");
        prov["raw_theta"] = *p.raw_theta;
      }
    }
    j["provenance"] = std::move(prov);
  }
  return j;
}

inline ModelFile model_file_from_json(const nlohmann::ordered_json& j) {
  using detail::get_number;
  using detail::member;
  if (!j.is_object()) throw FormatError("model file: top level must be an object");
  ModelFile file;
  const auto& version = member(j, "format_version");
  if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
    throw FormatError("model file: unsupported format_version");
  }
  file.format_version = version.get<int>();
  const std::size_t n = detail::get_count(member(j, "n_elements"), "n_elements");
  const auto& elements = member(j, "elements");
  if (!elements.is_array() || elements.size() != n) {
    throw FormatError("model file: 'elements' must be an array of n_elements entries");
  }
  for (const auto& el : elements) {
    if (!el.is_object()) throw FormatError("model file: element must be an object");
    const auto& mu = member(el, "mu");
    const auto& a = member(el, "A");
    if (!mu.is_array() || mu.size() != 2) throw FormatError("model file: mu must have 2 entries");
    if (!a.is_array() || a.size() != 2 || !a[0].is_array() || !a[1].is_array() ||
        a[0].size() != 2 || a[1].size() != 2) {
      throw FormatError("model file: A must be 2x2");
    }
    GaussianElement e;
    e.weight = get_number(member(el, "w"), "w");
    e.center = {get_number(mu[0], "mu"), get_number(mu[1], "mu")};
    e.precision = {get_number(a[0][0], "A"), get_number(a[0][1], "A"), get_number(a[1][0], "A"),
                   get_number(a[1][1], "A")};
    if (!e.precision.symmetric()) throw FormatError("model file: A must be symmetric (a12 == a21)");
    file.model.elements.push_back(e);
  }

  if (auto it = j.find("provenance"); it != j.end()) {
    if (!it->is_object()) throw FormatError("model file: provenance must be an object");
    Provenance p;
    if (auto d = it->find("source_dims"); d != it->end()) {
      if (!d->is_array() || d->size() != 2) throw FormatError("model file: source_dims must be [H, W]");
      file.model.source_dims = ImageDims{detail::get_count((*d)[0], "source_dims"),
                                         detail::get_count((*d)[1], "source_dims")};
    }
    if (auto c = it->find("fit_config"); c != it->end()) p.fit_config = detail::config_from_json(*c);
    if (auto l = it->find("final_losses"); l != it->end()) {
      if (!l->is_object()) throw FormatError("model file: final_losses must be an object");
      p.final_losses = LossBreakdown{get_number(member(*l, "l2"), "l2"),
                                     get_number(member(*l, "pae"), "pae"),
                                     get_number(member(*l, "total"), "total")};
    }
    if (auto r = it->find("raw_theta"); r != it->end()) {
      if (!r->is_array()) throw FormatError("model file: raw_theta must be an array");
      std::vector<double> theta;
      for (const auto& v : *r) theta.push_back(get_number(v, "raw_theta"));
      p.raw_theta = std::move(theta);
    }
    if (p.fit_config || p.final_losses || p.raw_theta) file.provenance = std::move(p);
  }
  return file;
}

inline std::string serialize(const ModelFile& file) { return to_json(file).dump(2) + "\n"; }

inline ModelFile parse_model_file(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model file: invalid JSON: ") + e.what());
  }
  return model_file_from_json(j);
}

inline void save_model_file(const std::filesystem::path& path, const ModelFile& file) {
  const std::string text = serialize(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error writing " + path.string());
}

inline ModelFile load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model_file(buffer.str());
}

}  // namespace gaussmix
