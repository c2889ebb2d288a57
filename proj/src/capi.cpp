// Copyright 2026 The adode Authors
// SPDX-License-Identifier: Apache-2.0

#include "adode/adode.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "adode/commands.hpp"
#include "adode/error.hpp"

struct adode_checkpoint {
  adode::ScoreModelCheckpoint ckpt;
};

struct adode_features {
  std::vector<adode::FeatureTensor> tensors;
};

namespace {

thread_local std::string g_last_error;

adode_status fail(adode_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
adode_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return ADODE_OK;
  } catch (const adode::Error& e) {
    return fail(static_cast<adode_status>(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ADODE_USAGE, std::string("config: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(ADODE_NUMERICAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ADODE_DATA, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p != nullptr) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

nlohmann::json parse_json(const char* text, const char* what) {
  if (text == nullptr) return nullptr;
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw adode::ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

adode::RunConfig run_config(const char* config_json) {
  if (config_json == nullptr) throw adode::ConfigError("config is NULL");
  return adode::parse_run_config(adode::resolve_run_config(parse_json(config_json, "config"), nullptr));
}

template <typename Cmd>
adode_status run(const char* config_json, char** out_summary, Cmd&& cmd) {
  return guarded([&] {
    const std::string s = cmd(run_config(config_json));
    if (out_summary != nullptr) *out_summary = dup(s);
  });
}

adode::LabeledScores labeled(const double* scores, const int* labels, size_t n) {
  if (n > 0 && (scores == nullptr || labels == nullptr)) throw adode::ConfigError("scores/labels are NULL");
  adode::LabeledScores d;
  d.score.assign(scores, scores + n);
  d.label.assign(labels, labels + n);
  return d;
}

// Forwards complete lines to a C callback.
class LineSink : public std::streambuf {
 public:
  LineSink(adode_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineSink() override {
    if (!line_.empty()) fn_(line_.c_str(), user_);
  }

 protected:
  int_type overflow(int_type ch) override {
    if (traits_type::eq_int_type(ch, traits_type::eof())) return traits_type::not_eof(ch);
    if (ch == '\n') {
      fn_(line_.c_str(), user_);
      line_.clear();
    } else {
      line_.push_back(static_cast<char>(ch));
    }
    return ch;
  }

 private:
  adode_log_fn fn_;
  void* user_;
  std::string line_;
};

}  // namespace

extern "C" {

const char* adode_version(void) { return "0.1.0"; }

const char* adode_last_error(void) { return g_last_error.c_str(); }

void adode_string_free(char* s) { std::free(s); }

adode_status adode_default_config(char** out_json) {
  return guarded([&] {
    if (out_json == nullptr) throw adode::ConfigError("out_json is NULL");
    *out_json = dup(adode::default_run_config().dump(2));
  });
}

adode_status adode_resolve_config(const char* file_json, const char* overrides_json, char** out_json) {
  return guarded([&] {
    if (out_json == nullptr) throw adode::ConfigError("out_json is NULL");
    const auto j = adode::resolve_run_config(parse_json(file_json, "config file"),
                                             parse_json(overrides_json, "overrides"));
    *out_json = dup(j.dump(2));
  });
}

adode_status adode_cmd_synth(const char* c, char** out) { return run(c, out, adode::cmd_synth); }
adode_status adode_cmd_train(const char* c, char** out) {
  return run(c, out, [](const adode::RunConfig& cfg) { return adode::cmd_train(cfg); });
}
adode_status adode_cmd_score(const char* c, char** out) { return run(c, out, adode::cmd_score); }
adode_status adode_cmd_eval(const char* c, char** out) { return run(c, out, adode::cmd_eval); }
adode_status adode_cmd_localize(const char* c, char** out) { return run(c, out, adode::cmd_localize); }
adode_status adode_cmd_ablate(const char* c, char** out) { return run(c, out, adode::cmd_ablate); }

adode_status adode_cmd_train_logged(const char* c, adode_log_fn log, void* user, char** out) {
  if (log == nullptr) return adode_cmd_train(c, out);
  return run(c, out, [&](const adode::RunConfig& cfg) {
    LineSink sink(log, user);
    std::ostream os(&sink);
    return adode::cmd_train(cfg, &os);
  });
}

adode_status adode_checkpoint_load(const char* path, adode_checkpoint** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) throw adode::ConfigError("path/out is NULL");
    *out = new adode_checkpoint{adode::load_checkpoint(path)};
  });
}

adode_status adode_checkpoint_save(const adode_checkpoint* ckpt, const char* path) {
  return guarded([&] {
    if (ckpt == nullptr || path == nullptr) throw adode::ConfigError("checkpoint/path is NULL");
    adode::save_checkpoint(ckpt->ckpt, path);
  });
}

size_t adode_checkpoint_input_dim(const adode_checkpoint* ckpt) {
  return ckpt == nullptr ? 0 : ckpt->ckpt.net.input_dim();
}

void adode_checkpoint_free(adode_checkpoint* ckpt) { delete ckpt; }

adode_status adode_checkpoint_log_likelihood(const adode_checkpoint* ckpt, const float* values, size_t n,
                                             uint64_t seed, double rtol, double atol, double* log_likelihood,
                                             double* bpd, uint64_t* nfe) {
  return guarded([&] {
    if (ckpt == nullptr || values == nullptr || log_likelihood == nullptr) {
      throw adode::ConfigError("checkpoint/values/log_likelihood is NULL");
    }
    const auto& s = ckpt->ckpt.scale;
    if (n != s.dim()) {
      throw adode::ConfigError("expected " + std::to_string(s.dim()) + " values, got " + std::to_string(n));
    }
    adode::FeatureTensor f{s.label, s.h, s.w, s.c, std::vector<float>(values, values + n)};
    adode::ScoringConfig sc;
    sc.solver.rtol = rtol;
    sc.solver.atol = atol;
    sc.solver.validate();
    sc.hutch.seed = seed;
    const adode::LikelihoodResult r = adode::feature_log_likelihood(ckpt->ckpt, f, sc);
    *log_likelihood = r.log_likelihood;
    if (bpd != nullptr) *bpd = r.bpd;
    if (nfe != nullptr) *nfe = r.n_function_evals;
  });
}

adode_status adode_features_read(const char* path, adode_features** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) throw adode::ConfigError("path/out is NULL");
    *out = new adode_features{adode::read_features(path)};
  });
}

adode_features* adode_features_create(void) { return new adode_features; }

adode_status adode_features_add(adode_features* f, const char* scale_id, size_t h, size_t w, size_t c,
                                const float* values) {
  return guarded([&] {
    if (f == nullptr || scale_id == nullptr || (values == nullptr && h * w * c > 0)) {
      throw adode::ConfigError("features/scale_id/values is NULL");
    }
    adode::FeatureTensor t{scale_id, h, w, c, std::vector<float>(values, values + h * w * c)};
    t.validate();
    f->tensors.push_back(std::move(t));
  });
}

adode_status adode_features_write(const adode_features* f, const char* path) {
  return guarded([&] {
    if (f == nullptr || path == nullptr) throw adode::ConfigError("features/path is NULL");
    adode::write_features(path, f->tensors);
  });
}

size_t adode_features_count(const adode_features* f) { return f == nullptr ? 0 : f->tensors.size(); }

const char* adode_features_scale_id(const adode_features* f, size_t i) {
  if (f == nullptr || i >= f->tensors.size()) return nullptr;
  return f->tensors[i].scale_id.c_str();
}

adode_status adode_features_dims(const adode_features* f, size_t i, size_t* h, size_t* w, size_t* c) {
  return guarded([&] {
    if (f == nullptr || h == nullptr || w == nullptr || c == nullptr) throw adode::ConfigError("argument is NULL");
    if (i >= f->tensors.size()) throw adode::ConfigError("tensor index out of range");
    *h = f->tensors[i].h;
    *w = f->tensors[i].w;
    *c = f->tensors[i].c;
  });
}

const float* adode_features_data(const adode_features* f, size_t i) {
  if (f == nullptr || i >= f->tensors.size()) return nullptr;
  return f->tensors[i].values.data();
}

void adode_features_free(adode_features* f) { delete f; }

adode_status adode_auroc(const double* scores, const int* labels, size_t n, double* out) {
  return guarded([&] {
    if (out == nullptr) throw adode::ConfigError("out is NULL");
    *out = adode::auroc(labeled(scores, labels, n));
  });
}

adode_status adode_best_f1(const double* scores, const int* labels, size_t n, double* f1, double* threshold) {
  return guarded([&] {
    if (f1 == nullptr) throw adode::ConfigError("f1 is NULL");
    const adode::F1Result r = adode::best_f1(labeled(scores, labels, n));
    *f1 = r.f1;
    if (threshold != nullptr) *threshold = r.threshold;
  });
}

}  // extern "C"
