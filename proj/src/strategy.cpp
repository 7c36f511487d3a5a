#include "domaincraft/strategy.hpp"

#include <algorithm>
#include <set>

#include "domaincraft/error.hpp"

namespace domaincraft {

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kNmt: return "nmt";
    case Objective::kBitextDenoise: return "bitext-denoise";
    case Objective::kMonoDenoise: return "mono-denoise";
    case Objective::kBitextPlusMonoDenoise: return "bitext+mono-denoise";
  }
  return "nmt";
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kVanillaFT: return "vanilla-ft";
    case Strategy::kMultiDomainFT: return "multi-domain-ft";
    case Strategy::kSingleDomainITTL: return "single-domain-ittl";
    case Strategy::kMultiDomainITTL: return "multi-domain-ittl";
    case Strategy::kPretrainBitext: return "pretrain-bitext";
    case Strategy::kPretrainBitextMono: return "pretrain-bitext-mono";
  }
  return "vanilla-ft";
}

std::string_view to_string(Mode mode) {
  return mode == Mode::kInDomain ? "in-domain" : "out-domain";
}

Objective parse_objective(std::string_view text) {
  for (auto o : {Objective::kNmt, Objective::kBitextDenoise,
                 Objective::kMonoDenoise, Objective::kBitextPlusMonoDenoise}) {
    if (text == to_string(o)) return o;
  }
  throw Error(ErrorKind::kConfig, "unknown objective: " + std::string(text));
}

Strategy parse_strategy(std::string_view text) {
  for (auto s : {Strategy::kVanillaFT, Strategy::kMultiDomainFT,
                 Strategy::kSingleDomainITTL, Strategy::kMultiDomainITTL,
                 Strategy::kPretrainBitext, Strategy::kPretrainBitextMono}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorKind::kConfig, "unknown strategy: " + std::string(text));
}

Mode parse_mode(std::string_view text) {
  if (text == "in-domain") return Mode::kInDomain;
  if (text == "out-domain") return Mode::kOutDomain;
  throw Error(ErrorKind::kConfig, "unknown mode: " + std::string(text));
}

int compute_rank(Strategy strategy) {
  switch (strategy) {
    case Strategy::kVanillaFT: return 0;
    case Strategy::kMultiDomainFT: return 1;
    case Strategy::kSingleDomainITTL: return 2;
    case Strategy::kMultiDomainITTL: return 3;
    case Strategy::kPretrainBitext: return 4;
    case Strategy::kPretrainBitextMono: return 5;
  }
  return 0;
}

void Schedule::validate() const {
  if (stages.empty()) {
    throw Error(ErrorKind::kValidation, "schedule " + id + " has no stages");
  }
  for (const auto& stage : stages) {
    stage.data.validate();
    if (stage.train) stage.train->validate();
  }
  if (mode == Mode::kInDomain) {
    if (!stages.back().data.contains(test.domain)) {
      throw Error(ErrorKind::kValidation,
                  "in-domain schedule " + id + " never trains on test domain " +
                      test.domain.name() + " in its final stage");
    }
  } else {
    for (const auto& stage : stages) {
      if (stage.data.contains(test.domain)) {
        throw Error(ErrorKind::kValidation,
                    "out-domain schedule " + id + " trains on test domain " +
                        test.domain.name());
      }
    }
  }
}

namespace {

std::string short_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kVanillaFT: return "vft";
    case Strategy::kMultiDomainFT: return "mdft";
    case Strategy::kSingleDomainITTL: return "sdittl";
    case Strategy::kMultiDomainITTL: return "mdittl";
    case Strategy::kPretrainBitext: return "ptb";
    case Strategy::kPretrainBitextMono: return "ptbm";
  }
  return "vft";
}

std::string join_keys(const std::vector<DomainId>& domains) {
  std::string out;
  for (const auto& d : domains) {
    if (!out.empty()) out += '.';
    out += d.key();
  }
  return out;
}

bool contains(const std::vector<DomainId>& v, const DomainId& d) {
  return std::find(v.begin(), v.end(), d) != v.end();
}

}  // namespace

Schedule build_schedule(const ScheduleRequest& req) {
  const DomainId test =
      req.mode == Mode::kInDomain ? req.final_domain
                                  : req.test_domain.value_or(req.final_domain);
  if (req.mode == Mode::kOutDomain) {
    if (!req.test_domain) {
      throw Error(ErrorKind::kValidation,
                  "out-domain schedules need an unseen test domain");
    }
    if (test == req.final_domain) {
      throw Error(ErrorKind::kValidation,
                  "out-domain test domain " + test.name() +
                      " cannot be the final-stage domain");
    }
  } else if (req.test_domain && !(*req.test_domain == req.final_domain)) {
    throw Error(ErrorKind::kValidation,
                "in-domain schedules test on the final domain " +
                    req.final_domain.name() + ", not " +
                    req.test_domain->name());
  }

  // Training domains: D without the held-out test domain in out-domain mode.
  std::vector<DomainId> train_domains;
  for (const auto& d : req.domains) {
    if (req.mode == Mode::kOutDomain && d.domain == test) continue;
    if (!contains(train_domains, d.domain)) train_domains.push_back(d.domain);
  }
  if (!contains(train_domains, req.final_domain)) {
    throw Error(ErrorKind::kUnknownDomain,
                "final domain " + req.final_domain.name() +
                    " is not among the available domains");
  }
  std::vector<DomainId> aux;
  for (const auto& d : train_domains) {
    if (!(d == req.final_domain)) aux.push_back(d);
  }

  const auto check_size = [&](const DomainId& domain, std::size_t size) {
    for (const auto& d : req.domains) {
      if (d.domain == domain && d.available > 0 && size > d.available &&
          !req.allow_upsample) {
        throw Error(ErrorKind::kSize,
                    "domain " + domain.name() + " has " +
                        std::to_string(d.available) + " pairs, " +
                        std::to_string(size) + " requested");
      }
    }
  };
  const auto component = [&](const DomainId& domain, std::size_t size) {
    check_size(domain, size);
    const auto it = std::find_if(
        req.domains.begin(), req.domains.end(),
        [&](const DomainSize& d) { return d.domain == domain; });
    const bool up = req.allow_upsample && it != req.domains.end() &&
                    it->available > 0 && size > it->available;
    return MixComponent{domain, size, up};
  };
  const auto dataset = [&](std::vector<MixComponent> components) {
    return DatasetSpec{std::move(components), req.seed};
  };
  const DatasetSpec final_data = dataset({component(req.final_domain, req.fi_size)});

  Schedule s;
  s.strategy = req.strategy;
  s.mode = req.mode;
  s.test = TestSpec{test, Split::kTest};
  s.lang = req.lang;
  s.fi_size = req.fi_size;

  std::vector<DomainId> used_aux;
  switch (req.strategy) {
    case Strategy::kVanillaFT:
      s.stages.push_back({final_data, Objective::kNmt, std::nullopt});
      break;

    case Strategy::kMultiDomainFT: {
      // With no auxiliary domain this degenerates to vanilla FT.
      std::vector<MixComponent> parts;
      for (const auto& d : aux) parts.push_back(component(d, req.im_size));
      parts.push_back(component(req.final_domain, req.fi_size));
      used_aux = aux;
      s.stages.push_back({dataset(std::move(parts)), Objective::kNmt, std::nullopt});
      break;
    }

    case Strategy::kSingleDomainITTL: {
      DomainId via = req.final_domain;
      if (req.intermediate.size() == 1) {
        via = req.intermediate.front();
      } else if (req.intermediate.empty() && aux.size() == 1) {
        via = aux.front();
      } else {
        throw Error(ErrorKind::kValidation,
                    "single-domain ITTL needs exactly one intermediate domain");
      }
      if (via == req.final_domain) {
        throw Error(ErrorKind::kValidation,
                    "single-domain ITTL intermediate and final domain are both " +
                        via.name());
      }
      if (!contains(train_domains, via)) {
        throw Error(ErrorKind::kUnknownDomain,
                    "intermediate domain " + via.name() +
                        " is not an available training domain");
      }
      used_aux = {via};
      s.stages.push_back(
          {dataset({component(via, req.im_size)}), Objective::kNmt, std::nullopt});
      s.stages.push_back({final_data, Objective::kNmt, std::nullopt});
      break;
    }

    case Strategy::kMultiDomainITTL: {
      if (aux.empty()) {
        throw Error(ErrorKind::kValidation,
                    "multi-domain ITTL needs at least two training domains");
      }
      std::vector<MixComponent> parts;
      for (const auto& d : aux) parts.push_back(component(d, req.im_size));
      if (req.mode == Mode::kInDomain) {
        parts.push_back(component(req.final_domain, req.fi_size));
      }
      used_aux = aux;
      s.stages.push_back({dataset(std::move(parts)), Objective::kNmt, std::nullopt});
      s.stages.push_back({final_data, Objective::kNmt, std::nullopt});
      break;
    }

    case Strategy::kPretrainBitext:
    case Strategy::kPretrainBitextMono: {
      std::vector<DomainId> sources = req.intermediate.empty() ? aux : req.intermediate;
      if (sources.empty()) {
        throw Error(ErrorKind::kValidation,
                    "continued pre-training needs an auxiliary domain");
      }
      std::vector<MixComponent> parts;
      for (const auto& d : sources) {
        if (!contains(train_domains, d)) {
          throw Error(ErrorKind::kUnknownDomain,
                      "pre-training domain " + d.name() +
                          " is not an available training domain");
        }
        parts.push_back(component(d, req.im_size));
      }
      used_aux = sources;
      const Objective objective = req.strategy == Strategy::kPretrainBitext
                                      ? Objective::kBitextDenoise
                                      : Objective::kBitextPlusMonoDenoise;
      s.stages.push_back({dataset(std::move(parts)), objective, std::nullopt});
      s.stages.push_back({final_data, Objective::kNmt, std::nullopt});
      break;
    }
  }

  if (!used_aux.empty()) s.im_size = req.im_size;
  std::string id = short_name(req.strategy) + "_" +
                   (req.mode == Mode::kInDomain ? "in" : "out");
  if (req.lang) id += "_" + req.lang->str();
  if (!used_aux.empty()) {
    id += "_aux-" + join_keys(used_aux) + "_im" + std::to_string(req.im_size);
  }
  id += "_fi" + std::to_string(req.fi_size) + "-" + req.final_domain.key();
  id += "_test-" + test.key();
  s.id = std::move(id);
  s.validate();
  return s;
}

std::vector<Schedule> enumerate_grid(const GridRequest& grid) {
  std::vector<Schedule> out;
  std::set<std::string> seen;
  for (Mode mode : grid.modes) {
    for (Strategy strategy : grid.strategies) {
      for (const auto& [via, final_domain] : grid.domain_pairs) {
        for (std::size_t im : grid.im_sizes) {
          for (std::size_t fi : grid.fi_sizes) {
            ScheduleRequest req;
            req.strategy = strategy;
            req.mode = mode;
            req.domains = grid.domains;
            req.final_domain = final_domain;
            if (mode == Mode::kOutDomain) {
              if (!grid.out_test_domain) {
                throw Error(ErrorKind::kValidation,
                            "out-domain grid needs a test domain");
              }
              req.test_domain = grid.out_test_domain;
            }
            if (strategy == Strategy::kSingleDomainITTL ||
                strategy == Strategy::kPretrainBitext ||
                strategy == Strategy::kPretrainBitextMono) {
              req.intermediate = {via};
            }
            req.im_size = im;
            req.fi_size = fi;
            req.seed = grid.seed;
            req.lang = grid.lang;
            Schedule s = build_schedule(req);
            if (seen.insert(s.id).second) out.push_back(std::move(s));
          }
        }
      }
    }
  }
  return out;
}

}  // namespace domaincraft
