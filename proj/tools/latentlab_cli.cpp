// latentlab command-line driver.
//
// Exit codes: 0 success, 1 a scenario expectation failed, 2 usage or
// configuration error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latentlab/corpus_io.hpp"
#include "latentlab/lab/scenarios.hpp"
#include "latentlab/lab/sweep.hpp"

namespace fs = std::filesystem;
using namespace latentlab;
using namespace latentlab::lab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::uint64_t seed = 1;
  std::size_t seeds = 20;
  std::string out;
  std::optional<std::uint64_t> budget;
  std::string format = "csv";

  OutputFormat output_format() const { return format == "txt" ? OutputFormat::Txt : OutputFormat::Csv; }
  std::vector<std::uint64_t> seed_list() const { return seed_range(seed, seeds); }
};

LatentWorld read_world(const std::string& path, const Globals& g) {
  WorldSpec spec = parse_world_text(read_text_file(path));
  if (g.budget) spec.enumeration_budget = *g.budget;
  return build_world(spec);
}

void write_file(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw ConfigError("cannot write " + path.string());
}

/// Prints the table and, with --out, writes <out>/<stem>.csv (plus .txt in txt format).
void publish(const Globals& g, const std::string& stem, const CsvTable& table) {
  std::cout << (g.format == "txt" ? text_table(table) : table.to_string());
  if (g.out.empty()) return;
  write_file(fs::path(g.out) / (stem + ".csv"), table.to_string());
  if (g.format == "txt") write_file(fs::path(g.out) / (stem + ".txt"), text_table(table));
}

std::size_t slot_count(const LatentWorld& w) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < w.regime_count(); ++k) n += w.regime(k).latent_size();
  return n;
}

// ---------------------------------------------------------------------------

int cmd_validate(const Globals& g, const std::string& world_path, const std::vector<std::string>& channels) {
  const auto world = read_world(world_path, g);
  std::cout << "world " << (world.name().empty() ? world_path : world.name()) << ": ok\n"
            << "  vocab_size " << world.vocab_size() << ", horizon " << world.horizon() << ", order "
            << world.context_order() << ", regimes " << world.regime_count() << ", latent slots "
            << slot_count(world) << ", enumeration_budget " << world.enumeration_budget() << '\n';
  for (const auto& path : channels) {
    const auto ch = load_channel(path, world);
    std::cout << "channel " << (ch.name().empty() ? path : ch.name()) << ": ok (" << ch.symbol_count()
              << " symbols, context_order " << ch.context_order() << (ch.reads_latent() ? "" : ", latent-blind")
              << (ch.inference_only() ? ", inference-only" : "") << ")\n";
  }
  return kExitPass;
}

int cmd_sample(const Globals& g, const std::string& world_path, std::size_t sequences) {
  const auto world = read_world(world_path, g);
  Rng rng(g.seed);
  publish(g, "corpus", corpus_table(sample_corpus(world, sequences, rng)));
  return kExitPass;
}

int cmd_measure(const Globals& g, const std::string& world_path, const std::string& channel_path,
                std::size_t posterior_len) {
  const auto world = read_world(world_path, g);
  std::vector<CmiReport> reports;
  for (std::size_t t = 0; t < world.horizon(); ++t) reports.push_back(conditional_mutual_information(world, t));
  CsvTable cmi = cmi_table(reports);
  if (!channel_path.empty()) {
    const auto ch = load_channel(channel_path, world);
    cmi.header.push_back("augmented_cmi_bits");
    for (std::size_t t = 0; t < world.horizon(); ++t)
      cmi.rows[t].push_back(format_double(augmented_cmi(world, ch, t).value_bits));
  }
  publish(g, "cmi", cmi);

  CsvTable post{{"prefix", "probability", "regime_entropy_bits"}, {}};
  for (std::size_t k = 0; k < world.regime_count(); ++k) post.header.push_back("p_regime" + std::to_string(k));
  for (std::size_t len = 0; len <= std::min(posterior_len, world.horizon()); ++len)
    for (const auto& e : enumerate_prefixes(world, len).entries) {
      const auto p = regime_posterior(world, e.prefix);
      std::vector<std::string> row{format_tokens(e.prefix), format_double(e.probability),
                                   format_double(latentlab::detail::entropy_bits(p))};
      for (double x : p) row.push_back(format_double(x));
      post.add(std::move(row));
    }
  std::cout << '\n';
  publish(g, "posterior", post);
  return kExitPass;
}

struct TrainArgs {
  std::string world, corpus, channel, model_out;
  std::size_t sequences = 1000;
  std::optional<std::size_t> order;
  std::optional<std::size_t> vocab;
  double lambda = 0.5;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  std::optional<LatentWorld> world;
  if (!a.world.empty()) world = read_world(a.world, g);
  if (!world && (!a.vocab || !a.order))
    throw ConfigError("train: without --world, both --vocab and --order are required");
  if (!world && a.corpus.empty()) throw ConfigError("train: give --world, --corpus, or both");
  const std::size_t vocab = a.vocab ? *a.vocab : world->vocab_size();
  const std::size_t order = a.order ? *a.order : world->horizon() - 1;

  Rng rng(g.seed);
  Corpus corpus;
  if (!a.corpus.empty()) {
    std::ifstream in(a.corpus);
    if (!in) throw ConfigError("cannot open corpus " + a.corpus);
    corpus = read_corpus_csv(in);
  } else {
    corpus = sample_corpus(*world, a.sequences, rng);
    corpus.latent_visible = true;
  }

  std::optional<AugmentationChannel> channel;
  TabularModel model = [&] {
    if (a.channel.empty()) return fit_tabular(corpus, vocab, order, a.lambda);
    if (!world) throw ConfigError("train: --channel needs --world");
    channel = load_channel(a.channel, *world);
    return fit_augmented(augment_corpus(corpus, *channel, rng), vocab, order, a.lambda);
  }();

  const std::string dump = dump_model(model);
  if (!a.model_out.empty()) write_file(a.model_out, dump);
  else if (!g.out.empty()) write_file(fs::path(g.out) / "model.txt", dump);
  else std::cout << dump;

  CsvTable summary{{"sequences", "order", "lambda", "rows", "mean_model_kl_bits", "mean_full_kl_bits",
                    "mean_augmented_kl_bits"},
                   {}};
  std::string kl = "", full = "", aug = "";
  if (world) {
    auto mean = [&](auto f) { return format_double(mean_over_positions(*world, f)); };
    kl = mean([&](std::size_t t) { return expected_model_kl(*world, model, t); });
    full = mean([&](std::size_t t) { return expected_full_kl(*world, model, t); });
    if (channel) aug = mean([&](std::size_t t) { return expected_augmented_model_kl(*world, *channel, model, t); });
  }
  summary.add({std::to_string(corpus.size()), std::to_string(order), format_double(a.lambda),
               std::to_string(model.rows().size()), kl, full, aug});
  std::cerr << text_table(summary);
  return kExitPass;
}

int cmd_augment_eval(const Globals& g, const std::string& world_path, const std::string& channel_path,
                     const std::vector<std::size_t>& grid, const std::vector<double>& lambdas,
                     std::optional<std::size_t> order_opt) {
  const auto world = read_world(world_path, g);
  const auto ch = load_channel(channel_path, world);
  const std::size_t order = order_opt ? *order_opt : world.horizon() - 1;

  CsvTable cmi{{"t", "cmi_bits", "augmented_cmi_bits"}, {}};
  for (std::size_t t = 0; t < world.horizon(); ++t)
    cmi.add({std::to_string(t), format_double(conditional_mutual_information(world, t).value_bits),
             format_double(augmented_cmi(world, ch, t).value_bits)});
  publish(g, "augment_cmi", cmi);

  CsvTable runs{{"n_transitions", "lambda", "seeds", "median_augmented_model_kl_bits",
                 "median_unaugmented_model_kl_bits", "unsupported_runs"},
                {}};
  for (double lambda : lambdas)
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      std::vector<double> with, without;
      std::size_t unsupported = 0;
      for (auto seed : g.seed_list()) {
        Rng rng(derive_seed(seed, 1200 + gi));
        Corpus c = sample_corpus(world, std::max<std::size_t>(1, grid[gi] / world.horizon()), rng);
        c.latent_visible = true;
        const auto data = augment_corpus(c, ch, rng);
        const auto aug = fit_augmented(data, world.vocab_size(), order, lambda);
        const auto plain = fit_tabular(data.corpus, world, order, lambda);
        auto mean_kl = [&](const TabularModel& m) {
          return mean_over_positions(world,
                                     [&](std::size_t t) { return expected_augmented_model_kl(world, ch, m, t); });
        };
        with.push_back(mean_kl(aug));
        without.push_back(mean_kl(plain));
        if (std::isinf(without.back())) ++unsupported;
      }
      runs.add({std::to_string(grid[gi]), format_double(lambda), std::to_string(g.seeds),
                format_double(median(with)), format_double(median(without)), std::to_string(unsupported)});
    }
  std::cout << '\n';
  publish(g, "augment_runs", runs);
  return kExitPass;
}

struct CollapseArgs {
  std::string world;
  double alpha = 1.0;
  std::size_t generations = 10;
  std::size_t per_generation = 500;
  double temperature = 1.0;
  bool greedy = false;
  double lambda = 0.0;
  std::optional<std::size_t> order;
  std::size_t heldout = 200;
};

int cmd_collapse(const Globals& g, const CollapseArgs& a) {
  const auto world = read_world(a.world, g);
  auto s = ContaminationSchedule::with_alpha(a.alpha, a.per_generation);
  s.generations = a.generations;
  s.decoding = a.greedy ? DecodingPolicy::argmax() : DecodingPolicy::sample(a.temperature);
  s.smoothing = a.lambda;
  s.order = a.order ? *a.order : world.horizon() - 1;
  s.heldout_sequences = a.heldout;
  s.validate();

  const auto seeds = g.seed_list();
  std::vector<GenerationTrace> traces(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    Rng rng(seeds[i]);
    traces[i] = run_generations(world, s, rng);
  });

  CsvTable all{{"seed", "generation", "kl_bits", "mean_entropy_bits", "support_size", "tail_mass",
                "heldout_ce_bits"},
               {}};
  CsvTable events{{"seed", "generation", "retries", "message"}, {}};
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (auto row : traces[i].table().rows) {
      row.insert(row.begin(), std::to_string(seeds[i]));
      all.add(std::move(row));
    }
    for (const auto& e : traces[i].events)
      events.add({std::to_string(seeds[i]), std::to_string(e.generation), std::to_string(e.retries), e.message});
  }
  CsvTable med{{"generation", "median_kl_bits", "median_entropy_bits", "median_support_size", "median_tail_mass"},
               {}};
  for (std::size_t n = 0; n <= s.generations; ++n) {
    std::vector<double> kl, h, sup, tail;
    for (const auto& tr : traces) {
      kl.push_back(tr.records[n].kl_bits);
      h.push_back(tr.records[n].mean_entropy_bits);
      sup.push_back(static_cast<double>(tr.records[n].support_size));
      tail.push_back(tr.records[n].tail_mass);
    }
    med.add({std::to_string(n), format_double(median(kl)), format_double(median(h)), format_double(median(sup)),
             format_double(median(tail))});
  }
  publish(g, "collapse_median", med);
  if (!g.out.empty()) {
    write_file(fs::path(g.out) / "collapse_traces.csv", all.to_string());
    write_file(fs::path(g.out) / "collapse_events.csv", events.to_string());
  }
  return kExitPass;
}

int cmd_scenario(const Globals& g, std::vector<std::string> names, bool all, bool list, const ScenarioOptions& base) {
  if (list) {
    CsvTable t{{"scenario", "description"}, {}};
    for (const auto& s : scenario_library()) t.add({s.name, s.description});
    std::cout << text_table(t);
    return kExitPass;
  }
  if (all) names = scenario_names();
  if (names.empty()) throw ConfigError("scenario: give a scenario name or --all (see --list)");
  ScenarioOptions opt = base;
  opt.seeds = g.seed_list();
  opt.budget = g.budget;
  const auto reports = run_scenarios(names, opt);
  const std::string out = g.out.empty() ? "results" : g.out;
  bool ok = true;
  CsvTable index{{"scenario", "passed", "failed_checks"}, {}};
  for (const auto& r : reports) {
    emit_report(r, out, g.output_format());
    std::cout << summary_text(r) << '\n';
    std::string failed;
    for (const auto& c : r.checks)
      if (!c.passed) failed += (failed.empty() ? "" : " ") + c.name;
    index.add({r.scenario, r.passed() ? "1" : "0", failed});
    ok = ok && r.passed();
  }
  if (reports.size() > 1) {
    write_file(fs::path(out) / "index.csv", index.to_string());
    std::cout << text_table(index);
  }
  std::cout << (ok ? "all expectations passed" : "EXPECTATION FAILURE") << " (reports in " << out << ")\n";
  return ok ? kExitPass : kExitExpectation;
}

int cmd_sweep(const Globals& g, const std::string& world_path, const SweepGrid& grid) {
  const auto world = read_world(world_path, g);
  publish(g, "sweep", run_sweep(world, grid, g.seed_list()));
  return kExitPass;
}

/// CSV -> whitespace-separated columns for gnuplot. With a group column each
/// group becomes its own data block (select with `index`).
int cmd_plot_data(const Globals& g, const std::string& input, const std::vector<std::string>& columns,
                  const std::string& group) {
  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open " + input);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(input + " is empty");
  const auto header = latentlab::detail::split(line, ',');
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("no column \"" + name + "\" in " + input);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> idx;
  for (const auto& c : columns.empty() ? header : columns) idx.push_back(column(c));
  const std::optional<std::size_t> gidx = group.empty() ? std::nullopt : std::optional(column(group));

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> blocks;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find('"') != std::string::npos) throw ConfigError("plot-data: quoted CSV fields are not supported");
    const auto f = latentlab::detail::split(line, ',');
    if (f.size() != header.size()) throw ConfigError("ragged row in " + input);
    std::string row;
    for (std::size_t i = 0; i < idx.size(); ++i) row += (i ? " " : "") + (f[idx[i]].empty() ? "NaN" : f[idx[i]]);
    const std::string key = gidx ? f[*gidx] : "";
    if (!blocks.count(key)) order.push_back(key);
    blocks[key].push_back(row);
  }
  std::string text = "#";
  for (auto i : idx) text += " " + header[i];
  text += '\n';
  for (std::size_t b = 0; b < order.size(); ++b) {
    if (b) text += "\n\n";
    if (gidx) text += "# " + group + " = " + order[b] + '\n';
    for (const auto& r : blocks[order[b]]) text += r + '\n';
  }
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_file(fs::path(g.out) / (fs::path(input).stem().string() + ".dat"), text);
  }
  return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentlab: exact latent-regime worlds, conditional mutual information, and tabular models"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t budget = 0;
  app.add_option("--seed", g.seed, "base seed")->capture_default_str();
  app.add_option("--seeds", g.seeds, "number of seeds (seed, seed+1, ...)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory");
  auto* budget_opt = app.add_option("--budget", budget, "enumeration budget override")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "csv or txt")->capture_default_str()->check(CLI::IsMember({"csv", "txt"}));

  std::string world_path, channel_path, corpus_path;
  std::vector<std::string> channel_paths;

  auto* validate = app.add_subcommand("validate", "check a world file (and optional channel files)");
  validate->add_option("world", world_path, "world JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--channel", channel_paths, "channel JSON (repeatable)")->check(CLI::ExistingFile);

  std::size_t sequences = 100;
  auto* sample = app.add_subcommand("sample", "draw a corpus (CSV) from a world");
  sample->add_option("--world", world_path)->required()->check(CLI::ExistingFile);
  sample->add_option("--sequences", sequences)->capture_default_str()->check(CLI::PositiveNumber);

  std::size_t posterior_len = 2;
  auto* measure = app.add_subcommand("measure", "exact CMI by position and regime posteriors");
  measure->add_option("--world", world_path)->required()->check(CLI::ExistingFile);
  measure->add_option("--channel", channel_path, "also report augmented CMI")->check(CLI::ExistingFile);
  measure->add_option("--posterior-length", posterior_len, "longest prefix in the posterior table")
      ->capture_default_str();

  TrainArgs ta;
  std::size_t vocab = 0, order = 0;
  auto* train = app.add_subcommand("train", "fit a tabular model and dump it");
  train->add_option("--world", ta.world, "world JSON (samples a corpus and reports KL)")->check(CLI::ExistingFile);
  train->add_option("--corpus", ta.corpus, "corpus CSV from `sample`")->check(CLI::ExistingFile);
  train->add_option("--channel", ta.channel, "train on augmented sequences")->check(CLI::ExistingFile);
  train->add_option("--sequences", ta.sequences)->capture_default_str()->check(CLI::PositiveNumber);
  auto* train_order = train->add_option("--order", order, "context order (default horizon-1)");
  auto* train_vocab = train->add_option("--vocab", vocab, "vocabulary size (needed without --world)");
  train->add_option("--lambda", ta.lambda, "additive smoothing")->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--model-out", ta.model_out, "model dump path");

  std::string n_list = "100,1000,10000", lambda_list = "0,0.5";
  auto* aug = app.add_subcommand("augment-eval", "augmented CMI and trained-model comparison for a channel");
  aug->add_option("--world", world_path)->required()->check(CLI::ExistingFile);
  aug->add_option("--channel", channel_path)->required()->check(CLI::ExistingFile);
  aug->add_option("--n", n_list, "comma-separated training sizes (transitions)")->capture_default_str();
  aug->add_option("--lambda", lambda_list, "comma-separated smoothing values")->capture_default_str();
  auto* aug_order = aug->add_option("--order", order, "context order (default horizon-1)");

  CollapseArgs ca;
  auto* col = app.add_subcommand("collapse", "run the contamination recursion over seeds");
  col->add_option("--world", ca.world)->required()->check(CLI::ExistingFile);
  col->add_option("--alpha", ca.alpha)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  col->add_option("--generations", ca.generations)->capture_default_str()->check(CLI::PositiveNumber);
  col->add_option("--per-generation", ca.per_generation, "sequences per generation")->capture_default_str();
  col->add_option("--temperature", ca.temperature)->capture_default_str()->check(CLI::PositiveNumber);
  col->add_flag("--greedy", ca.greedy, "argmax decoding");
  col->add_option("--lambda", ca.lambda)->capture_default_str()->check(CLI::NonNegativeNumber);
  auto* col_order = col->add_option("--order", order, "context order (default horizon-1)");
  col->add_option("--heldout", ca.heldout, "held-out real sequences")->capture_default_str();

  std::vector<std::string> names;
  bool all = false, list = false;
  ScenarioOptions sopt = default_options();
  auto* scen = app.add_subcommand("scenario", "run built-in scenarios and emit reports");
  scen->add_option("name", names, "scenario name(s)");
  scen->add_flag("--all", all, "run every scenario");
  scen->add_flag("--list", list, "list scenarios");
  scen->add_option("--zero-bits", sopt.about_zero_bits, "threshold for \"about zero\"")->capture_default_str();
  scen->add_option("--away-bits", sopt.away_from_zero_bits, "threshold for \"bounded away from zero\"")
      ->capture_default_str();

  SweepGrid grid;
  std::string sw_n = "1000", sw_alpha = "0", sw_t = "1", sw_lambda = "0.5", sw_order;
  auto* sweep = app.add_subcommand("sweep", "grid over N, alpha, temperature, lambda and order");
  sweep->add_option("--world", world_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("--n", sw_n, "training sizes (transitions)")->capture_default_str();
  sweep->add_option("--alpha", sw_alpha, "synthetic fractions; alpha > 0 runs the recursion")->capture_default_str();
  sweep->add_option("--temperature", sw_t)->capture_default_str();
  sweep->add_option("--lambda", sw_lambda)->capture_default_str();
  sweep->add_option("--order", sw_order, "context orders (default horizon-1)");
  sweep->add_option("--generations", grid.generations)->capture_default_str()->check(CLI::PositiveNumber);

  std::string plot_in, plot_group;
  std::vector<std::string> plot_cols;
  auto* plot = app.add_subcommand("plot-data", "convert a CSV table to a gnuplot data file");
  plot->add_option("csv", plot_in)->required()->check(CLI::ExistingFile);
  plot->add_option("--columns", plot_cols, "columns to keep, in order")->delimiter(',');
  plot->add_option("--group", plot_group, "split into one data block per value of this column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }
  if (budget_opt->count()) g.budget = budget;

  try {
    if (*validate) return cmd_validate(g, world_path, channel_paths);
    if (*sample) return cmd_sample(g, world_path, sequences);
    if (*measure) return cmd_measure(g, world_path, channel_path, posterior_len);
    if (*train) {
      if (train_order->count()) ta.order = order;
      if (train_vocab->count()) ta.vocab = vocab;
      return cmd_train(g, ta);
    }
    if (*aug)
      return cmd_augment_eval(g, world_path, channel_path, parse_size_list(n_list), parse_double_list(lambda_list),
                              aug_order->count() ? std::optional(order) : std::nullopt);
    if (*col) {
      if (col_order->count()) ca.order = order;
      return cmd_collapse(g, ca);
    }
    if (*scen) return cmd_scenario(g, names, all, list, sopt);
    if (*sweep) {
      grid.n_transitions = parse_size_list(sw_n);
      grid.alpha = parse_double_list(sw_alpha);
      grid.temperature = parse_double_list(sw_t);
      grid.smoothing = parse_double_list(sw_lambda);
      if (!sw_order.empty()) grid.order = parse_size_list(sw_order);
      return cmd_sweep(g, world_path, grid);
    }
    if (*plot) return cmd_plot_data(g, plot_in, plot_cols, plot_group);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
