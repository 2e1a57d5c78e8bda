#include "rolecheck/cli.hpp"

#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rolecheck/config.hpp"
#include "rolecheck/errors.hpp"
#include "rolecheck/pipeline.hpp"
#include "rolecheck/report.hpp"
#include "rolecheck/review_server.hpp"
#include "rolecheck/templates.hpp"

namespace rolecheck {

namespace {

struct Options {
  std::string ingest_profile;
  std::string ingest_corpus;
  int chunk_target = 0;
  std::string gen_memories_endpoint;
  std::string inject_endpoint;
  std::string transform_endpoint;
  std::string review_kind = "memory";
  std::string review_host = "127.0.0.1";
  std::string review_static_dir;
  std::string review_roster;
  std::string review_rules;
  int review_port = 8080;
  int review_required = 3;
  std::string finalize_kind = "memory";
  std::string finalize_roster;
  std::string finalize_rules;
  int finalize_required = 3;
  std::string build_dataset_out_path;
  std::string stats_dataset;
  std::string stats_format = "markdown";
  std::string embed_index_embedder;
  std::string run_dataset;
  std::string run_strategy = "vanilla";
  std::string run_responder;
  std::string run_embedder;
  std::string run_run_id;
  std::string run_runs_dir = "runs";
  std::string run_cases;
  int run_trials = 3;
  int run_k = 3;
  int run_m = 3;
  int run_k_per_seed = 1;
  int run_iterations = 1;
  std::string judge_run;
  std::string judge_judge;
  std::string judge_runs_dir = "runs";
  int judge_trials = 0;
  std::string report_runs;
  std::string report_runs_dir = "runs";
  std::string report_format = "markdown";
  std::string report_out_path;
  std::string report_dataset;
  std::string audit_sample_run;
  std::string audit_sample_runs_dir = "runs";
  std::string audit_sample_out_path;
  int audit_sample_n = 20;
  std::uint64_t audit_sample_seed = 0;
};

struct Common {
  std::string config_path;
  std::string work = "work";
  std::optional<std::uint64_t> seed;
  int workers = 0;
};

RunConfig load_config(const Common& c, bool required) {
  if (c.config_path.empty()) {
    if (required) throw UsageError("--config is required for this subcommand");
    return RunConfig{};
  }
  return RunConfig::load(c.config_path);
}

TemplateSet templates_for(const RunConfig& cfg) {
  return cfg.template_dir.empty() ? TemplateSet::builtin() : TemplateSet::load(cfg.resolve(cfg.template_dir));
}

std::uint64_t seed_for(const Common& c, const RunConfig& cfg) { return c.seed.value_or(cfg.seed); }
int workers_for(const Common& c, const RunConfig& cfg) { return c.workers > 0 ? c.workers : cfg.workers; }

std::filesystem::path run_dir_for(const std::string& run, const std::string& runs_dir) {
  if (std::filesystem::is_directory(run)) return run;
  return std::filesystem::path(runs_dir) / run;
}

void add_common(CLI::App* sub, Common& c, bool with_config) {
  if (with_config) sub->add_option("--config", c.config_path, "Run config file (JSON)");
  sub->add_option("--work", c.work, "Construction work directory")->capture_default_str();
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

ReviewServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rolecheck: build error-probing datasets for role-playing agents and score detection strategies"};
  app.name("rolecheck");
  app.require_subcommand(1);
  Common c;
  Options o;
  std::function<void()> action;

  // ingest
  {
    auto* sub = app.add_subcommand("ingest", "Register a character profile and its corpus");
    add_common(sub, c, true);
    sub->add_option("--profile", o.ingest_profile, "Profile JSON file")->required();
    sub->add_option("--corpus", o.ingest_corpus, "Corpus text file (overrides corpus_path)");
    sub->callback([&] {
      action = [&] {
        auto p = stage_ingest(Workspace(c.work), o.ingest_profile, o.ingest_corpus);
        out << "ingested " << p.character_id << " (" << p.corpus_text.size() << " bytes)\n";
      };
    });
  }
  // chunk
  {
    auto* sub = app.add_subcommand("chunk", "Split every character corpus into sentence chunks");
    add_common(sub, c, true);
    sub->add_option("--target", o.chunk_target, "Target sentences per chunk");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, false);
        int n = stage_chunk(Workspace(c.work), o.chunk_target > 0 ? o.chunk_target : cfg.chunk_sentences);
        out << "wrote " << n << " chunks\n";
      };
    });
  }
  // gen-memories
  {
    auto* sub = app.add_subcommand("gen-memories", "Generate candidate memories from chunks");
    add_common(sub, c, true);
    sub->add_option("--workers", c.workers);
    sub->add_option("--constructor", o.gen_memories_endpoint, "Constructor endpoint id");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, true);
        auto bundle = build_provider(cfg);
        auto s = stage_gen_memories(Workspace(c.work), *bundle.provider, cfg.role("constructor", o.gen_memories_endpoint),
                                    templates_for(cfg), workers_for(c, cfg));
        out << "chunks " << s.chunks << ", memories " << s.generated << ", pending " << s.pending
            << ", rule-rejected " << s.rule_rejected << ", unparseable chunks " << s.parse_failures << "\n";
      };
    });
  }
  // inject
  {
    auto* sub = app.add_subcommand("inject", "Inject a kke and a uke error into every kept memory");
    add_common(sub, c, true);
    sub->add_option("--workers", c.workers);
    sub->add_option("--seed", c.seed);
    sub->add_option("--constructor", o.inject_endpoint, "Constructor endpoint id");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, true);
        auto bundle = build_provider(cfg);
        auto registry = cfg.registry.empty() ? SubDisciplineRegistry::builtin()
                                             : SubDisciplineRegistry::load(cfg.resolve(cfg.registry));
        auto s = stage_inject(Workspace(c.work), *bundle.provider, cfg.role("constructor", o.inject_endpoint),
                              templates_for(cfg), registry, seed_for(c, cfg), workers_for(c, cfg));
        out << "memories " << s.memories << ", queries " << s.queries << ", review-flagged " << s.flagged << "\n";
      };
    });
  }
  // transform
  {
    auto* sub = app.add_subcommand("transform", "Rewrite false memories as yes/no questions");
    add_common(sub, c, true);
    sub->add_option("--workers", c.workers);
    sub->add_option("--constructor", o.transform_endpoint, "Constructor endpoint id");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, true);
        auto bundle = build_provider(cfg);
        auto s = stage_transform(Workspace(c.work), *bundle.provider, cfg.role("constructor", o.transform_endpoint),
                                 templates_for(cfg), workers_for(c, cfg));
        out << "transformed " << s.transformed << ", invalid " << s.invalid << "\n";
      };
    });
  }
  // review
  {
    auto* sub = app.add_subcommand("review", "Serve the screening API, or apply scripted verdicts");
    add_common(sub, c, true);
    sub->add_option("--kind", o.review_kind, "memory | query_pair")->capture_default_str();
    sub->add_option("--host", o.review_host)->capture_default_str();
    sub->add_option("--port", o.review_port)->capture_default_str();
    sub->add_option("--static", o.review_static_dir, "Directory with the review UI bundle");
    sub->add_option("--roster", o.review_roster, "Comma-separated annotator ids");
    sub->add_option("--required", o.review_required, "Annotators required per item")->capture_default_str();
    sub->add_option("--auto-annotator", o.review_rules, "Rules file; verdicts are scripted and no server starts");
    sub->callback([&] {
      action = [&] {
        Workspace ws(c.work);
        auto k = item_kind_from_string(o.review_kind);
        if (!o.review_rules.empty()) {
          auto auto_annotator = AutoAnnotator::from_file(o.review_rules);
          auto store = open_screening(ws, k, auto_annotator.annotators());
          int n = auto_annotator.annotate(*store, k);
          out << "recorded " << n << " scripted verdicts\n";
          return;
        }
        auto store = open_screening(ws, k, split_csv(o.review_roster));
        ReviewServer server(*store, o.review_static_dir, o.review_required);
        int bound = server.start(o.review_host, o.review_port);
        out << "review API on http://" << o.review_host << ":" << bound << "/api/ (Ctrl-C to stop)\n" << std::flush;
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        server.wait();
        g_server = nullptr;
      };
    });
  }
  // finalize
  {
    auto* sub = app.add_subcommand("finalize", "Keep the items every annotator kept");
    add_common(sub, c, true);
    sub->add_option("--kind", o.finalize_kind, "memory | query_pair")->capture_default_str();
    sub->add_option("--roster", o.finalize_roster, "Comma-separated annotator ids");
    sub->add_option("--auto-annotator", o.finalize_rules, "Take the roster from this rules file");
    sub->add_option("--required", o.finalize_required)->capture_default_str();
    sub->callback([&] {
      action = [&] {
        auto names = o.finalize_rules.empty() ? split_csv(o.finalize_roster) : AutoAnnotator::from_file(o.finalize_rules).annotators();
        auto r = stage_finalize(Workspace(c.work), item_kind_from_string(o.finalize_kind), names, o.finalize_required);
        char ratio[32];
        std::snprintf(ratio, sizeof ratio, "%.4f", r.overlap_ratio);
        out << "items " << r.n_items << ", kept_all " << r.kept_all << ", kept_any " << r.kept_any
            << ", overlap_ratio " << ratio << "\n";
      };
    });
  }
  // build-dataset
  {
    auto* sub = app.add_subcommand("build-dataset", "Assemble the probing dataset from screened pairs");
    add_common(sub, c, true);
    sub->add_option("--seed", c.seed);
    sub->add_option("--out", o.build_dataset_out_path, "Dataset path (default <work>/dataset.jsonl)");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, false);
        auto ds = stage_build_dataset(Workspace(c.work), seed_for(c, cfg), templates_for(cfg).hashes(), o.build_dataset_out_path);
        out << "dataset: " << ds.records.size() << " records over " << ds.characters.size() << " characters\n";
      };
    });
  }
  // stats
  {
    auto* sub = app.add_subcommand("stats", "Per-category counts and mean query length");
    sub->add_option("--dataset", o.stats_dataset)->required();
    sub->add_option("--format", o.stats_format, "markdown | json")->capture_default_str();
    sub->callback([&] {
      action = [&] {
        auto s = stats(load(o.stats_dataset));
        if (o.stats_format == "json") out << s.to_json().dump(2) << "\n";
        else if (o.stats_format == "markdown") out << render_stats(s);
        else throw UsageError("unknown stats format '" + o.stats_format + "'");
      };
    });
  }
  // embed-index
  {
    auto* sub = app.add_subcommand("embed-index", "Embed chunks and persist one index per character");
    add_common(sub, c, true);
    sub->add_option("--embedder", o.embed_index_embedder, "Embedding endpoint id");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, true);
        auto bundle = build_provider(cfg);
        auto idx = stage_embed_index(Workspace(c.work), *bundle.provider, cfg.role("embedder", o.embed_index_embedder));
        for (const auto& [cid, index] : idx)
          out << cid << ": " << index.size() << " chunks, dim " << index.dim() << "\n";
      };
    });
  }
  // run
  {
    auto* sub = app.add_subcommand("run", "Answer every dataset query with one detection strategy");
    add_common(sub, c, true);
    sub->add_option("--workers", c.workers);
    sub->add_option("--seed", c.seed);
    sub->add_option("--dataset", o.run_dataset)->required();
    sub->add_option("--strategy", o.run_strategy, "vanilla|cot|few_shot|self_reflection|rag|rag_few_shot|s2rd")
        ->capture_default_str();
    sub->add_option("--responder", o.run_responder, "Responder endpoint id");
    sub->add_option("--embedder", o.run_embedder, "Embedding endpoint id");
    sub->add_option("--trials", o.run_trials)->capture_default_str();
    sub->add_option("--run-id", o.run_run_id, "Default: <strategy>-<responder>");
    sub->add_option("--runs-dir", o.run_runs_dir)->capture_default_str();
    sub->add_option("--cases", o.run_cases, "Case bank file");
    sub->add_option("--k", o.run_k, "Chunks retrieved for rag kinds")->capture_default_str();
    sub->add_option("--m", o.run_m, "Seed memories for s2rd")->capture_default_str();
    sub->add_option("--k-per-seed", o.run_k_per_seed)->capture_default_str();
    sub->add_option("--iterations", o.run_iterations, "s2rd recollection/doubt passes")->capture_default_str();
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, true);
        auto bundle = build_provider(cfg);
        RunOptions ro;
        ro.spec.kind = strategy_from_string(o.run_strategy);
        ro.spec.responder = cfg.role("responder", o.run_responder);
        if (needs_index(ro.spec.kind)) ro.spec.embedder = cfg.role("embedder", o.run_embedder);
        ro.spec.k_retrieval = o.run_k;
        ro.spec.m_seeds = o.run_m;
        ro.spec.k_per_seed = o.run_k_per_seed;
        ro.spec.iterations = o.run_iterations;
        ro.run_id = o.run_run_id.empty() ? o.run_strategy + "-" + ro.spec.responder : o.run_run_id;
        ro.runs_dir = o.run_runs_dir;
        ro.dataset_path = o.run_dataset;
        ro.work_dir = c.work == "work" ? std::filesystem::path() : std::filesystem::path(c.work);
        ro.trials = o.run_trials;
        ro.workers = workers_for(c, cfg);
        ro.case_bank = o.run_cases.empty() ? std::string() : o.run_cases;
        ro.seed = seed_for(c, cfg);
        auto r = stage_run(ro, *bundle.provider, templates_for(cfg));
        out << "run " << ro.run_id << ": " << r.records.size() << " responses in " << r.run_dir.string() << "\n";
      };
    });
  }
  // judge
  {
    auto* sub = app.add_subcommand("judge", "Judge a run's responses and score them");
    add_common(sub, c, true);
    sub->add_option("--workers", c.workers);
    sub->add_option("--run", o.judge_run, "Run id or run directory")->required();
    sub->add_option("--judge", o.judge_judge, "Judge endpoint id");
    sub->add_option("--runs-dir", o.judge_runs_dir)->capture_default_str();
    sub->add_option("--trials", o.judge_trials, "Default: the run's trial count");
    sub->callback([&] {
      action = [&] {
        auto cfg = load_config(c, true);
        auto bundle = build_provider(cfg);
        JudgeOptions jo{run_dir_for(o.judge_run, o.judge_runs_dir), cfg.role("judge", o.judge_judge), o.judge_trials, workers_for(c, cfg)};
        for (const char* other : {"constructor", "responder"})
          if (cfg.roles.count(other) && cfg.roles.at(other) == jo.judge)
            err << "warning: judge endpoint '" << jo.judge << "' is also the " << other << "\n";
        auto table = stage_judge(jo, *bundle.provider, templates_for(cfg));
        out << render({table}, std::nullopt, ReportFormat::markdown).body;
      };
    });
  }
  // report
  {
    auto* sub = app.add_subcommand("report", "Render scored runs as a comparison table");
    sub->add_option("--runs", o.report_runs, "Comma-separated run ids or directories")->required();
    sub->add_option("--runs-dir", o.report_runs_dir)->capture_default_str();
    sub->add_option("--format", o.report_format, "markdown | csv | json-lines")->capture_default_str();
    sub->add_option("--out", o.report_out_path, "Write here instead of stdout");
    sub->add_option("--stats", o.report_dataset, "Append dataset statistics for this dataset");
    sub->callback([&] {
      action = [&] {
        std::vector<ScoreTable> tables;
        for (const auto& r : split_csv(o.report_runs)) {
          auto path = run_dir_for(r, o.report_runs_dir) / "scores.json";
          if (!std::filesystem::exists(path)) throw UsageError("no scores at '" + path.string() + "'; run 'judge'");
          tables.push_back(ScoreTable::from_json(nlohmann::json::parse(text::read_file(path.string()))));
        }
        std::optional<DatasetStats> s;
        if (!o.report_dataset.empty()) s = stats(load(o.report_dataset));
        auto doc = render(tables, s, report_format_from_string(o.report_format));
        if (o.report_out_path.empty()) out << doc.body;
        else text::write_file(o.report_out_path, doc.body);
      };
    });
  }
  // audit-sample
  {
    auto* sub = app.add_subcommand("audit-sample", "Export randomly chosen judged responses for manual review");
    sub->add_option("--run", o.audit_sample_run)->required();
    sub->add_option("--runs-dir", o.audit_sample_runs_dir)->capture_default_str();
    sub->add_option("--n", o.audit_sample_n)->capture_default_str();
    sub->add_option("--seed", o.audit_sample_seed)->capture_default_str();
    sub->add_option("--out", o.audit_sample_out_path);
    sub->callback([&] {
      action = [&] {
        auto sheet = audit_sample(run_dir_for(o.audit_sample_run, o.audit_sample_runs_dir), o.audit_sample_n, o.audit_sample_seed);
        if (o.audit_sample_out_path.empty()) out << sheet;
        else text::write_file(o.audit_sample_out_path, sheet);
      };
    });
  }

  std::vector<std::string> argv_store{"rolecheck"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "UsageError: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const UsageError& e) {
    err << e.kind() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const IncompleteVerdicts& e) {
    err << e.kind() << ": " << e.what() << "\n";
    for (const auto& m : e.missing()) err << "  missing " << m.item_id << " / " << m.annotator_id << "\n";
    return kExitDomainError;
  } catch (const Error& e) {
    err << e.kind() << ": " << e.what() << "\n";
    return kExitDomainError;
  } catch (const nlohmann::json::exception& e) {
    err << "IoError: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "IoError: " << e.what() << "\n";
    return kExitDomainError;
  }
}

}  // namespace rolecheck
