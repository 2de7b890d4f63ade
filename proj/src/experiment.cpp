// experiment.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "gciva/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <tuple>
#include <sstream>

#include <json.hpp>

#include "gciva/wav.hpp"

namespace gciva {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kAux:
      return "aux";
    case Algorithm::kGcAux:
      return "gc-aux";
    case Algorithm::kGcGrad:
      return "gc-grad";
  }
  return "aux";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "aux") return Algorithm::kAux;
  if (name == "gc-aux") return Algorithm::kGcAux;
  if (name == "gc-grad") return Algorithm::kGcGrad;
  throw ConfigError("unknown algorithm '" + name + "' (expected aux, gc-aux or gc-grad)");
}

Index default_iterations(Algorithm a) { return a == Algorithm::kGcGrad ? 350 : 100; }

// ---------------------------------------------------------------------------
// Key-value configuration.

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += fmt(items[i]);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (trim(v.substr(used)).empty()) return d;
  } catch (const std::exception&) {
  }
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  throw ConfigError("invalid value for key '" + key + "': '" + v + "' is not a number");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (trim(v.substr(used)).empty()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid value for key '" + key + "': '" + v + "' is not an integer");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  const long long i = parse_int(key, v);
  if (i < 0) throw ConfigError("invalid value for key '" + key + "': must be nonnegative");
  return static_cast<std::uint64_t>(i);
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
  return out;
}

}  // namespace

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv;
  kv["algorithm"] = gciva::to_string(algorithm);
  kv["iterations"] = std::to_string(iterations);
  kv["window_length"] = std::to_string(stft.window_length);
  kv["hop"] = std::to_string(stft.hop);
  kv["sample_rate"] = format_number(stft.sample_rate);
  kv["window"] = gciva::to_string(stft.window);
  kv["doa"] = join(doa, format_number);
  kv["constrained_channels"] = join(constrained_channels, [](Index k) { return std::to_string(k + 1); });
  kv["sigma2"] = format_number(sigma2);
  kv["lambda_e"] = format_number(lambda_e);
  kv["stepsize"] = format_number(stepsize);
  kv["constraint_weight"] = format_number(constraint_weight);
  kv["mic_spacing"] = format_number(mic_spacing);
  kv["speed_of_sound"] = format_number(speed_of_sound);
  kv["sources"] = join(sources, [](const std::string& s) { return s; });
  kv["source_doas"] = join(source_doas, format_number);
  kv["duration"] = format_number(duration);
  kv["seed"] = std::to_string(seed);
  kv["snr"] = join(snr, format_number);
  kv["doa_pairs"] = join(doa_pairs, [](const std::pair<double, double>& p) {
    return format_number(p.first) + "/" + format_number(p.second);
  });
  kv["seeds"] = join(seeds, [](std::uint64_t s) { return std::to_string(s); });
  kv["t60"] = join(t60, format_number);
  kv["algorithms"] = join(algorithms, [](Algorithm a) { return gciva::to_string(a); });
  kv["input"] = input;
  kv["references"] = join(references, [](const std::string& s) { return s; });
  kv["reference_mic"] = std::to_string(reference_mic < 0 ? 0 : reference_mic + 1);
  kv["filter_len"] = std::to_string(filter_len);
  kv["out"] = out;
  return kv;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  ExperimentConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"algorithm", [&](auto&, auto& v) { c.algorithm = algorithm_from_string(v); }},
      {"iterations",
       [&](auto& k, auto& v) {
         const long long i = parse_int(k, v);
         if (i < -1) throw ConfigError("invalid value for key 'iterations': must be >= 0");
         c.iterations = static_cast<Index>(i);
       }},
      {"window_length", [&](auto& k, auto& v) { c.stft.window_length = parse_int(k, v); }},
      {"hop", [&](auto& k, auto& v) { c.stft.hop = parse_int(k, v); }},
      {"sample_rate", [&](auto& k, auto& v) { c.stft.sample_rate = parse_double(k, v); }},
      {"window",
       [&](auto& k, auto& v) {
         try {
           c.stft.window = window_kind_from_string(v);
         } catch (const InvalidInput& e) {
           throw ConfigError("invalid value for key '" + k + "': " + e.what());
         }
       }},
      {"doa", [&](auto& k, auto& v) { c.doa = parse_doubles(k, v); }},
      {"constrained_channels",
       [&](auto& k, auto& v) {
         c.constrained_channels.clear();
         for (const auto& item : split_list(v)) {
           const long long ch = parse_int(k, item);
           if (ch < 1) throw ConfigError("invalid value for key '" + k + "': channels are 1-based");
           c.constrained_channels.push_back(static_cast<Index>(ch - 1));
         }
       }},
      {"sigma2", [&](auto& k, auto& v) { c.sigma2 = parse_double(k, v); }},
      {"lambda_e", [&](auto& k, auto& v) { c.lambda_e = parse_double(k, v); }},
      {"stepsize", [&](auto& k, auto& v) { c.stepsize = parse_double(k, v); }},
      {"constraint_weight", [&](auto& k, auto& v) { c.constraint_weight = parse_double(k, v); }},
      {"mic_spacing", [&](auto& k, auto& v) { c.mic_spacing = parse_double(k, v); }},
      {"speed_of_sound", [&](auto& k, auto& v) { c.speed_of_sound = parse_double(k, v); }},
      {"sources", [&](auto&, auto& v) { c.sources = split_list(v); }},
      {"source_doas", [&](auto& k, auto& v) { c.source_doas = parse_doubles(k, v); }},
      {"duration", [&](auto& k, auto& v) { c.duration = parse_double(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_uint(k, v); }},
      {"snr", [&](auto& k, auto& v) { c.snr = parse_doubles(k, v); }},
      {"doa_pairs",
       [&](auto& k, auto& v) {
         c.doa_pairs.clear();
         for (const auto& item : split_list(v)) {
           const auto slash = item.find('/');
           if (slash == std::string::npos)
             throw ConfigError("invalid value for key '" + k + "': expected pairs like 45/135");
           c.doa_pairs.emplace_back(parse_double(k, trim(item.substr(0, slash))),
                                    parse_double(k, trim(item.substr(slash + 1))));
         }
       }},
      {"seeds",
       [&](auto& k, auto& v) {
         c.seeds.clear();
         for (const auto& item : split_list(v)) c.seeds.push_back(parse_uint(k, item));
       }},
      {"t60", [&](auto& k, auto& v) { c.t60 = parse_doubles(k, v); }},
      {"algorithms",
       [&](auto&, auto& v) {
         c.algorithms.clear();
         for (const auto& item : split_list(v)) c.algorithms.push_back(algorithm_from_string(item));
       }},
      {"input", [&](auto&, auto& v) { c.input = v; }},
      {"references", [&](auto&, auto& v) { c.references = split_list(v); }},
      {"reference_mic",
       [&](auto& k, auto& v) {
         const long long m = parse_int(k, v);
         if (m < 0) throw ConfigError("invalid value for key 'reference_mic': must be >= 0");
         c.reference_mic = static_cast<Index>(m) - 1;
       }},
      {"filter_len", [&](auto& k, auto& v) { c.filter_len = parse_int(k, v); }},
      {"out", [&](auto&, auto& v) { c.out = v; }},
  };

  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }

  auto bad = [](const std::string& key, const std::string& why) {
    return ConfigError("invalid value for key '" + key + "': " + why);
  };
  try {
    c.stft.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("invalid STFT settings: ") + e.what());
  }
  if (!(c.sigma2 > 0)) throw bad("sigma2", "must be positive");
  if (!(c.lambda_e >= 0)) throw bad("lambda_e", "must be nonnegative");
  if (!(c.stepsize >= 0)) throw bad("stepsize", "must be nonnegative");
  if (!(c.constraint_weight >= 0)) throw bad("constraint_weight", "must be nonnegative");
  if (!(c.mic_spacing > 0)) throw bad("mic_spacing", "must be positive");
  if (!(c.speed_of_sound > 0)) throw bad("speed_of_sound", "must be positive");
  if (!(c.duration > 0)) throw bad("duration", "must be positive");
  if (c.filter_len < 1) throw bad("filter_len", "must be >= 1");
  for (double d : c.source_doas)
    if (!(d >= 0 && d <= 180)) throw bad("source_doas", "DOAs must lie in [0, 180]");
  for (const auto& [a, b] : c.doa_pairs)
    if (!(a >= 0 && a <= 180 && b >= 0 && b <= 180))
      throw bad("doa_pairs", "DOAs must lie in [0, 180]");
  for (double t : c.t60)
    if (!(t >= 0)) throw bad("t60", "must be nonnegative");
  return c;
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Separation.

SeparationSettings separation_settings(const ExperimentConfig& config) {
  SeparationSettings s;
  s.algorithm = config.algorithm;
  s.iterations = config.resolved_iterations();
  s.sigma2 = config.sigma2;
  s.lambda_e = config.lambda_e;
  s.stepsize = config.stepsize;
  s.constraint_weight = config.constraint_weight;
  if (config.algorithm != Algorithm::kAux) {
    s.constrained_channels = config.constrained_channels;
    s.doa = config.doa;
    if (s.doa.size() != s.constrained_channels.size())
      throw ConfigError("invalid value for key 'doa': " + std::to_string(s.doa.size()) +
                        " DOAs for " + std::to_string(s.constrained_channels.size()) +
                        " constrained channels");
  }
  return s;
}

IvaResult<double> run_algorithm(const Spectrogram<double>& mix, const SeparationSettings& settings,
                                const ArrayGeometry& geometry,
                                const IterationObserver<double>& observer) {
  const SourceModel<double> model;
  switch (settings.algorithm) {
    case Algorithm::kAux:
      return run_auxiva(mix, model, settings.iterations, observer);
    case Algorithm::kGcAux: {
      const auto prior = make_prior(settings.constrained_channels, settings.doa, settings.sigma2,
                                    settings.lambda_e, geometry, mix.config());
      return run_informed_iva(mix, prior, model, settings.iterations, observer);
    }
    case Algorithm::kGcGrad: {
      const auto targets =
          make_prior(settings.constrained_channels, settings.doa, 1.0, 0.0, geometry, mix.config());
      return run_gradient_iva(mix, targets, model, settings.iterations, settings.stepsize,
                              settings.constraint_weight, observer);
    }
  }
  throw InvalidInput("run_algorithm: unknown algorithm");
}

std::vector<Eigen::VectorXd> resynthesize(const IvaResult<double>& result, Index ref_mic) {
  const Signal time = synthesize(project_back(result.demixed, result.demixing, ref_mic));
  std::vector<Eigen::VectorXd> out;
  for (Index k = 0; k < time.rows(); ++k) out.emplace_back(time.row(k).transpose());
  return out;
}

// ---------------------------------------------------------------------------
// Scenes.

RenderedScene render_scene(const SceneRequest& request, const ArrayGeometry& geometry,
                           const StftConfig& stft) {
  const auto samples = static_cast<Index>(std::llround(request.duration * stft.sample_rate));
  RenderedScene scene;
  for (std::size_t k = 0; k < request.doas.size(); ++k)
    scene.spec.sources.push_back(
        synthetic_source(samples, stft.sample_rate, request.seed * 7919 + k + 1));
  scene.spec.doas_deg = request.doas;
  scene.spec.snr_db = request.snr_db;
  scene.spec.seed = request.seed;
  if (request.t60 > 0)
    scene.spec.room_responses = synthetic_room_responses(request.doas, geometry, stft.sample_rate,
                                                         request.t60, request.seed);
  scene.mixture = simulate_mixture(scene.spec, geometry, stft);
  return scene;
}

std::vector<Eigen::VectorXd> images_at(const Mixture& mixture, Index mic) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& img : mixture.images) out.emplace_back(img.row(mic).transpose());
  return out;
}

std::vector<RunRecord> evaluate_scene(const RenderedScene& scene, Algorithm algorithm,
                                      const ExperimentConfig& config,
                                      const ReferenceProjector& projector,
                                      const std::vector<double>& input_sir_db) {
  if (scene.mixture.images.size() != 2)
    throw InvalidInput("evaluate_scene: two-source scenes only");
  const Spectrogram<double> mix = analyze(scene.mixture.mixture, config.stft);
  const ArrayGeometry geometry = config.geometry();

  SeparationSettings base;
  base.algorithm = algorithm;
  base.iterations = config.iterations >= 0 ? config.iterations : default_iterations(algorithm);
  base.sigma2 = config.sigma2;
  base.lambda_e = config.lambda_e;
  base.stepsize = config.stepsize;
  base.constraint_weight = config.constraint_weight;

  auto record = [&](const IvaResult<double>& res, Index target) {
    RunRecord r;
    r.algorithm = algorithm;
    r.target = target;
    r.intended = target == 0 ? std::vector<Index>{0, 1} : std::vector<Index>{1, 0};
    r.match = match_permutation(resynthesize(res, 0), projector);
    r.ordering_success = r.match.assignment == r.intended;
    for (Index c = 0; c < 2; ++c) {
      const Index s = r.match.assignment[static_cast<std::size_t>(c)];
      r.sir_db.push_back(r.match.sir_db(c, s));
      r.sdr_db.push_back(r.match.sdr_db(c, s));
      r.sir_in_db.push_back(input_sir_db[static_cast<std::size_t>(s)]);
    }
    r.trace = res.trace;
    return r;
  };

  std::vector<RunRecord> out;
  if (algorithm == Algorithm::kAux) {
    const auto res = run_algorithm(mix, base, geometry);
    for (Index t = 0; t < 2; ++t) out.push_back(record(res, t));
    return out;
  }
  for (Index t = 0; t < 2; ++t) {
    SeparationSettings s = base;
    s.constrained_channels = {0};
    const double doa = algorithm == Algorithm::kGcAux ? scene.spec.doas_deg[static_cast<std::size_t>(1 - t)]
                                                      : scene.spec.doas_deg[static_cast<std::size_t>(t)];
    s.doa = {doa};
    out.push_back(record(run_algorithm(mix, s, geometry), t));
  }
  return out;
}

std::string cost_trace_csv(const CostTrace<double>& trace) {
  std::string out = "iteration,J_IVA,J_prior,J_total,normalized_J_IVA\n";
  for (std::size_t l = 0; l < trace.size(); ++l) {
    out += std::to_string(l) + "," + format_number(trace.j_iva[l]) + "," +
           format_number(trace.j_prior[l]) + "," + format_number(trace.total(l)) + "," +
           format_number(trace.normalized_iva(l)) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands.

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json config_echo(const ExperimentConfig& config) {
  json j = json::object();
  for (const auto& [k, v] : config.to_key_values()) j[k] = v;
  return j;
}

json trace_json(const CostTrace<double>& trace) {
  return json{{"j_iva", trace.j_iva}, {"j_prior", trace.j_prior}};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string room_name(double t60) {
  if (t60 <= 0) return "anechoic";
  return "t60_" + std::to_string(static_cast<long long>(std::llround(t60 * 1000))) + "ms";
}

}  // namespace

int run_simulate(const ExperimentConfig& config) {
  const ArrayGeometry geometry = config.geometry();
  const auto samples = static_cast<Index>(std::llround(config.duration * config.stft.sample_rate));
  if (config.snr.empty()) throw ConfigError("invalid value for key 'snr': empty list");
  if (static_cast<Index>(config.source_doas.size()) != geometry.size())
    throw ConfigError("invalid value for key 'source_doas': " + std::to_string(geometry.size()) +
                      " DOAs required");

  SceneSpec spec;
  spec.doas_deg = config.source_doas;
  spec.snr_db = config.snr.front();
  spec.seed = config.seed;
  if (config.sources.empty()) {
    for (std::size_t k = 0; k < config.source_doas.size(); ++k)
      spec.sources.push_back(
          synthetic_source(samples, config.stft.sample_rate, config.seed * 7919 + k + 1));
  } else {
    if (config.sources.size() != config.source_doas.size())
      throw ConfigError("invalid value for key 'sources': one file per source DOA is required");
    for (const auto& path : config.sources) {
      const WavData w = read_wav(path);
      if (w.sample_rate != config.stft.sample_rate)
        throw ConfigError("invalid value for key 'sources': " + path + " has sample rate " +
                          format_number(w.sample_rate));
      spec.sources.emplace_back(w.samples.row(0).transpose());
    }
  }
  if (config.t60.size() == 1 && config.t60.front() > 0)
    spec.room_responses = synthetic_room_responses(spec.doas_deg, geometry, config.stft.sample_rate,
                                                   config.t60.front(), config.seed);
  const Mixture mix = simulate_mixture(spec, geometry, config.stft);

  ensure_dir(config.out);
  const fs::path dir(config.out);
  write_wav((dir / "mixture.wav").string(), mix.mixture, config.stft.sample_rate,
            SampleFormat::kFloat32);
  json files = json::array();
  for (std::size_t k = 0; k < mix.images.size(); ++k) {
    const std::string name = "image_" + std::to_string(k + 1) + ".wav";
    write_wav((dir / name).string(), mix.images[k], config.stft.sample_rate,
              SampleFormat::kFloat32);
    files.push_back(name);
  }
  json meta{{"config", config_echo(config)},
            {"mixture", "mixture.wav"},
            {"images", files},
            {"source_doas", spec.doas_deg},
            {"snr_db", std::isfinite(spec.snr_db) ? json(spec.snr_db) : json("inf")},
            {"measured_snr_db", std::isfinite(measured_snr_db(mix)) ? json(measured_snr_db(mix))
                                                                     : json("inf")},
            {"sample_rate", config.stft.sample_rate},
            {"samples", mix.mixture.cols()},
            {"mic_spacing", config.mic_spacing}};
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  return 0;
}

int run_separate(const ExperimentConfig& config) {
  if (config.input.empty()) throw ConfigError("invalid value for key 'input': no mixture given");
  const WavData wav = read_wav(config.input);
  StftConfig stft = config.stft;
  stft.sample_rate = wav.sample_rate;
  const Index mics = wav.samples.rows();
  if (mics < 2) throw InvalidInput("separate: the mixture needs at least two channels");
  if (config.reference_mic >= mics)
    throw ConfigError("invalid value for key 'reference_mic': exceeds channel count");
  const ArrayGeometry geometry = ArrayGeometry::linear(mics, config.mic_spacing, config.speed_of_sound);

  const Spectrogram<double> mix = analyze(wav.samples, stft);
  const SeparationSettings settings = separation_settings(config);
  const IvaResult<double> res = run_algorithm(mix, settings, geometry);
  const auto estimates = resynthesize(res, config.reference_mic);

  Signal out(mics, wav.samples.cols());
  for (Index k = 0; k < mics; ++k) out.row(k) = estimates[static_cast<std::size_t>(k)].transpose();

  ensure_dir(config.out);
  const fs::path dir(config.out);
  write_wav((dir / "separated.wav").string(), out, wav.sample_rate, wav.format);
  write_text(dir / "cost_trace.csv", cost_trace_csv(res.trace));

  json report{{"config", config_echo(config)},
              {"algorithm", to_string(settings.algorithm)},
              {"iterations", settings.iterations},
              {"sample_rate", wav.sample_rate},
              {"separated", "separated.wav"},
              {"cost_trace", trace_json(res.trace)}};

  if (!config.references.empty()) {
    if (static_cast<Index>(config.references.size()) != mics)
      throw ConfigError("invalid value for key 'references': one image file per source required");
    std::vector<Signal> images;
    for (const auto& path : config.references) {
      WavData w = read_wav(path);
      if (w.samples.rows() != mics || w.samples.cols() != wav.samples.cols())
        throw InvalidInput("separate: reference " + path + " does not match the mixture shape");
      images.push_back(std::move(w.samples));
    }
    Eigen::MatrixXd sir(mics, mics), sdr(mics, mics);
    std::map<Index, ReferenceProjector> projectors;
    for (Index c = 0; c < mics; ++c) {
      const Index mic = config.reference_mic < 0 ? c : config.reference_mic;
      if (!projectors.count(mic)) {
        std::vector<Eigen::VectorXd> refs;
        for (const auto& img : images) refs.emplace_back(img.row(mic).transpose());
        projectors.emplace(mic, ReferenceProjector(std::move(refs), config.filter_len));
      }
      const Decomposition d = projectors.at(mic).decompose(estimates[static_cast<std::size_t>(c)]);
      for (Index s = 0; s < mics; ++s) {
        sir(c, s) = d.per_source[static_cast<std::size_t>(s)].sir_db;
        sdr(c, s) = d.per_source[static_cast<std::size_t>(s)].sdr_db;
      }
    }
    const auto assignment = best_assignment(sir);
    json per_channel = json::array();
    bool identity = true;
    for (Index c = 0; c < mics; ++c) {
      const Index s = assignment[static_cast<std::size_t>(c)];
      identity = identity && s == c;
      per_channel.push_back({{"channel", c + 1},
                             {"source", s + 1},
                             {"sir_db", sir(c, s)},
                             {"sdr_db", sdr(c, s)}});
    }
    report["metrics"] = {{"channels", per_channel},
                         {"ordering_success", identity},
                         {"filter_len", config.filter_len}};
  }
  write_text(dir / "report.json", report.dump(2) + "\n");
  return 0;
}

int run_benchmark(const ExperimentConfig& config) {
  if (config.snr.empty()) throw ConfigError("invalid value for key 'snr': empty list");
  if (config.doa_pairs.empty()) throw ConfigError("invalid value for key 'doa_pairs': empty list");
  if (config.seeds.empty()) throw ConfigError("invalid value for key 'seeds': empty list");
  if (config.t60.empty()) throw ConfigError("invalid value for key 't60': empty list");
  if (config.algorithms.empty()) throw ConfigError("invalid value for key 'algorithms': empty list");

  const ArrayGeometry geometry = config.geometry();
  struct Bucket {
    std::vector<double> sir, sdr, gain;
    std::size_t runs = 0, successes = 0;
  };
  // Keyed by (room index, snr index, algorithm index) to keep row order fixed.
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Bucket> buckets;

  std::string runs_csv =
      "room,snr_db,doa_1,doa_2,seed,algorithm,target,channel,source,sir_db,sdr_db,sir_in_db,"
      "ordering_success\n";
  for (std::size_t ri = 0; ri < config.t60.size(); ++ri) {
    for (std::size_t si = 0; si < config.snr.size(); ++si) {
      for (const auto& [d1, d2] : config.doa_pairs) {
        for (std::uint64_t seed : config.seeds) {
          SceneRequest req;
          req.doas = {d1, d2};
          req.snr_db = config.snr[si];
          req.t60 = config.t60[ri];
          req.duration = config.duration;
          req.seed = seed;
          const RenderedScene scene = render_scene(req, geometry, config.stft);
          const ReferenceProjector projector(images_at(scene.mixture, 0), config.filter_len);
          const Decomposition input =
              projector.decompose(scene.mixture.mixture.row(0).transpose());
          std::vector<double> sir_in;
          for (const auto& s : input.per_source) sir_in.push_back(s.sir_db);

          for (std::size_t ai = 0; ai < config.algorithms.size(); ++ai) {
            const Algorithm alg = config.algorithms[ai];
            Bucket& b = buckets[{ri, si, ai}];
            for (const RunRecord& r : evaluate_scene(scene, alg, config, projector, sir_in)) {
              ++b.runs;
              if (r.ordering_success) ++b.successes;
              for (Index c = 0; c < 2; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                b.sir.push_back(r.sir_db[cc]);
                b.sdr.push_back(r.sdr_db[cc]);
                b.gain.push_back(r.sir_db[cc] - r.sir_in_db[cc]);
                runs_csv += room_name(config.t60[ri]) + "," + format_short(config.snr[si]) + "," +
                            format_short(d1) + "," + format_short(d2) + "," +
                            std::to_string(seed) + "," + to_string(alg) + "," +
                            std::to_string(r.target + 1) + "," + std::to_string(c + 1) + "," +
                            std::to_string(r.match.assignment[cc] + 1) + "," +
                            format_short(r.sir_db[cc]) + "," + format_short(r.sdr_db[cc]) + "," +
                            format_short(r.sir_in_db[cc]) + "," +
                            (r.ordering_success ? "1" : "0") + "\n";
              }
            }
          }
        }
      }
    }
  }

  std::string agg =
      "room,snr_db,algorithm,runs,mean_sir_db,mean_sdr_db,mean_sir_improvement_db,median_sir_db,"
      "median_sdr_db,ordering_success_rate\n";
  for (const auto& [key, b] : buckets) {
    const auto& [ri, si, ai] = key;
    agg += room_name(config.t60[ri]) + "," + format_short(config.snr[si]) + "," +
           to_string(config.algorithms[ai]) + "," + std::to_string(b.runs) + "," +
           format_short(mean(b.sir)) + "," + format_short(mean(b.sdr)) + "," +
           format_short(mean(b.gain)) + "," + format_short(median(b.sir)) + "," +
           format_short(median(b.sdr)) + "," +
           format_short(static_cast<double>(b.successes) / static_cast<double>(b.runs)) + "\n";
  }

  ensure_dir(config.out);
  const fs::path dir(config.out);
  write_text(dir / "benchmark.csv", agg);
  write_text(dir / "benchmark_runs.csv", runs_csv);
  write_text(dir / "benchmark_config.json", json{{"config", config_echo(config)}}.dump(2) + "\n");
  return 0;
}

}  // namespace gciva
