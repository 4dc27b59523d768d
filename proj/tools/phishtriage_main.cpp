#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phishtriage/backend_client.hpp"
#include "phishtriage/defaults.hpp"
#include "phishtriage/errors.hpp"
#include "phishtriage/evaluate.hpp"
#include "phishtriage/ingest.hpp"
#include "phishtriage/jsonfmt.hpp"
#include "phishtriage/pipeline.hpp"
#include "phishtriage/report.hpp"

namespace fs = std::filesystem;
using namespace phishtriage;

namespace {

struct Options {
    std::size_t policy_cap = 0;  // 0 = unset
    std::string policy_fraction;
    double z_spike = kDefaultZSpike;
    std::string lexicon_path, rules_path, tags_path, stopwords_path,
        baseline_path;
    std::string backend_summ = "reference";
    std::string backend_trig = "reference";
    std::string backend_intent = "reference";
    std::string transport;
    unsigned timeout_ms = 30000;
    std::string format = "text";
    std::string corpus_format = "auto";
    std::string input_format = "rfc822";
    std::uint64_t seed = 0;
    std::size_t sample = 0;
    unsigned jobs = 1;
    std::string config_path, out_path, corpus_label, task;
};

std::string read_all(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string read_file_or_stdin(const std::string& path) {
    if (path == "-") return read_all(std::cin);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return read_all(in);
}

// Config file: JSON object whose keys mirror the long flags; flags given
// on the command line win.
void apply_config(const CLI::App& app, Options& opts) {
    if (opts.config_path.empty()) return;
    std::ifstream in(opts.config_path);
    if (!in) throw InputError("cannot open config " + opts.config_path);
    nlohmann::json j = nlohmann::json::parse(read_all(in), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw SchemaError("config must be a JSON object");
    }
    auto unset = [&](const std::string& flag) {
        const CLI::Option* opt = app.get_option_no_throw(flag);
        return opt != nullptr && opt->count() == 0;
    };
    auto take = [&](const char* key, const std::string& flag, auto& target) {
        using T = std::decay_t<decltype(target)>;
        if (j.contains(key) && unset(flag)) target = j[key].get<T>();
    };
    take("policy_cap", "--policy-cap", opts.policy_cap);
    take("policy_fraction", "--policy-fraction", opts.policy_fraction);
    take("z_spike", "--z-spike", opts.z_spike);
    take("lexicon", "--lexicon", opts.lexicon_path);
    take("rules", "--rules", opts.rules_path);
    take("tags", "--tags", opts.tags_path);
    take("stopwords", "--stopwords", opts.stopwords_path);
    take("baseline", "--baseline", opts.baseline_path);
    take("backend_summ", "--backend-summ", opts.backend_summ);
    take("backend_trig", "--backend-trig", opts.backend_trig);
    take("backend_intent", "--backend-intent", opts.backend_intent);
    take("transport", "--transport", opts.transport);
    take("timeout_ms", "--timeout-ms", opts.timeout_ms);
    take("format", "--format", opts.format);
    take("corpus_format", "--corpus-format", opts.corpus_format);
    take("input_format", "--input-format", opts.input_format);
    take("seed", "--seed", opts.seed);
    take("sample", "--sample", opts.sample);
    take("jobs", "--jobs", opts.jobs);
}

std::string version_label(const std::string& path,
                          std::string_view builtin_version) {
    if (path.empty()) return std::string(builtin_version);
    return fs::path(path).filename().string();
}

AnalyzerConfig build_analyzer_config(const Options& opts) {
    AnalyzerConfig cfg;
    if (opts.policy_cap > 0) cfg.policy.hard_cap_words = opts.policy_cap;
    if (!opts.policy_fraction.empty()) {
        cfg.policy.fraction = Fraction::parse(opts.policy_fraction);
    }
    if (opts.z_spike <= 0.0) throw InputError("--z-spike must be positive");
    cfg.z_spike = opts.z_spike;
    if (!opts.stopwords_path.empty()) {
        cfg.stopwords = StopwordSet::parse(
            read_file_or_stdin(opts.stopwords_path),
            version_label(opts.stopwords_path, defaults::kStopwordsVersion));
    }
    if (!opts.lexicon_path.empty()) {
        cfg.lexicon = Lexicon::parse(
            read_file_or_stdin(opts.lexicon_path),
            version_label(opts.lexicon_path, defaults::kLexiconVersion));
    }
    if (!opts.tags_path.empty()) {
        cfg.registry = TagRegistry::parse(
            read_file_or_stdin(opts.tags_path),
            version_label(opts.tags_path, defaults::kRegistryVersion));
    }
    if (!opts.rules_path.empty()) {
        cfg.rules = RuleTable::parse(
            read_file_or_stdin(opts.rules_path), cfg.registry,
            version_label(opts.rules_path, defaults::kRulesVersion));
    } else if (!opts.tags_path.empty()) {
        // default rules revalidated against the user registry
        cfg.rules = RuleTable::parse(defaults::intent_rules_json(), cfg.registry,
                                     std::string(defaults::kRulesVersion));
    }
    if (!opts.baseline_path.empty()) {
        cfg.baseline =
            CorpusBaseline::from_json(read_file_or_stdin(opts.baseline_path));
    }
    return cfg;
}

bool any_external(const Options& opts) {
    return opts.backend_summ == "external" || opts.backend_trig == "external" ||
           opts.backend_intent == "external";
}

std::unique_ptr<BackendConnection> open_connection(const Options& opts) {
    if (!any_external(opts)) return nullptr;
    if (opts.transport.empty()) {
        throw InputError("--transport is required with external backends");
    }
    return BackendConnection::open(TransportSpec::parse(opts.transport),
                                   std::chrono::milliseconds(opts.timeout_ms));
}

void wire_backends(Analyzer& analyzer, const Options& opts,
                   BackendConnection* conn) {
    if (opts.backend_summ == "external") analyzer.use_external_summarizer(*conn);
    if (opts.backend_trig == "external") analyzer.use_external_triggers(*conn);
    if (opts.backend_intent == "external") analyzer.use_external_intents(*conn);
}

CorpusFormat detect_corpus_format(const std::string& path,
                                  const std::string& requested) {
    if (requested == "mbox") return CorpusFormat::mbox;
    if (requested == "eml_dir") return CorpusFormat::eml_dir;
    if (requested == "jsonl") return CorpusFormat::jsonl;
    std::error_code ec;
    if (fs::is_directory(path, ec)) return CorpusFormat::eml_dir;
    std::string ext = fs::path(path).extension().string();
    if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::jsonl;
    return CorpusFormat::mbox;
}

std::string render_report(const PhishReport& report, const EmailBody& body,
                          const std::string& format) {
    if (format == "json") return render_json(report) + "\n";
    if (format == "html") return render_html(report, body);
    return render_text(report);
}

// --- subcommands ---

int cmd_analyze(const Options& opts, const std::string& input) {
    auto conn = open_connection(opts);
    Analyzer analyzer(build_analyzer_config(opts));
    wire_backends(analyzer, opts, conn.get());

    EmailFormat fmt = opts.input_format == "jsonl" ? EmailFormat::jsonl_record
                                                   : EmailFormat::rfc822;
    RawEmail email = parse_email(read_file_or_stdin(input), fmt);
    if (input != "-" && fmt == EmailFormat::rfc822) {
        email.id = fs::path(input).filename().string();
    }
    AnalysisResult result = analyzer.analyze(email);
    std::cout << render_report(result.report, result.body, opts.format);
    return 0;
}

nlohmann::json error_record(const std::string& id, const std::string& type,
                            const std::string& message) {
    nlohmann::json j;
    j["email_id"] = id;
    j["error"] = {{"type", type}, {"message", message}};
    return j;
}

int cmd_batch(const Options& opts, const std::string& corpus_path) {
    auto conn = open_connection(opts);
    Analyzer analyzer(build_analyzer_config(opts));
    wire_backends(analyzer, opts, conn.get());

    auto stream =
        load_corpus(corpus_path, detect_corpus_format(corpus_path,
                                                      opts.corpus_format));

    std::atomic<std::size_t> processed{0}, skipped{0}, spiked{0};

    // Results are emitted strictly in corpus order whatever --jobs is.
    std::mutex out_mutex;
    std::map<std::size_t, std::string> ready;
    std::size_t next_emit = 0;
    auto emit = [&](std::size_t seq, std::string line) {
        std::lock_guard lock(out_mutex);
        ready.emplace(seq, std::move(line));
        while (!ready.empty() && ready.begin()->first == next_emit) {
            std::cout << ready.begin()->second;
            ready.erase(ready.begin());
            ++next_emit;
        }
    };

    auto process_one = [&](const RawEmail& email) -> std::string {
        try {
            AnalysisResult result = analyzer.analyze(email);
            ++processed;
            if (!result.report.profile.spikes.empty()) ++spiked;
            return render_json(result.report) + "\n";
        } catch (const Error& e) {
            ++skipped;
            std::string type = "AnalysisError";
            if (dynamic_cast<const EmptyBody*>(&e)) type = "EmptyBody";
            else if (dynamic_cast<const BackendError*>(&e)) type = "BackendError";
            return error_record(email.id, type, e.what()).dump() + "\n";
        }
    };

    std::size_t seq = 0;
    stream->set_skip_handler([&](const std::string& id,
                                 const std::string& reason) {
        ++skipped;
        emit(seq++,
             error_record(id, "UnparseableMessage", reason).dump() + "\n");
    });

    unsigned jobs = std::max(1u, opts.jobs);
    auto run_over = [&](auto next_email) {
        if (jobs == 1) {
            while (auto email = next_email()) emit(seq++, process_one(*email));
            return;
        }
        std::deque<std::pair<std::size_t, RawEmail>> queue;
        std::mutex qmutex;
        std::condition_variable qcv, space_cv;
        bool done = false;
        const std::size_t max_queue = jobs * 4;
        std::vector<std::thread> workers;
        workers.reserve(jobs);
        for (unsigned w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    std::pair<std::size_t, RawEmail> item;
                    {
                        std::unique_lock lock(qmutex);
                        qcv.wait(lock, [&] { return done || !queue.empty(); });
                        if (queue.empty()) return;
                        item = std::move(queue.front());
                        queue.pop_front();
                        space_cv.notify_one();
                    }
                    emit(item.first, process_one(item.second));
                }
            });
        }
        while (auto email = next_email()) {
            std::unique_lock lock(qmutex);
            space_cv.wait(lock, [&] { return queue.size() < max_queue; });
            queue.emplace_back(seq++, std::move(*email));
            qcv.notify_one();
        }
        {
            std::lock_guard lock(qmutex);
            done = true;
        }
        qcv.notify_all();
        for (std::thread& t : workers) t.join();
    };

    if (opts.sample > 0) {
        std::vector<RawEmail> sampled =
            sample_corpus(*stream, opts.sample, opts.seed);
        std::size_t i = 0;
        run_over([&]() -> std::optional<RawEmail> {
            if (i >= sampled.size()) return std::nullopt;
            return std::move(sampled[i++]);
        });
    } else {
        run_over([&]() { return stream->next(); });
    }

    nlohmann::json summary;
    summary["summary"] = {{"processed", processed.load()},
                          {"skipped", skipped.load()},
                          {"spiked", spiked.load()}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_fit_baseline(const Options& opts, const std::string& corpus_path) {
    auto conn = open_connection(opts);
    AnalyzerConfig cfg = build_analyzer_config(opts);
    LexiconTriggerBackend reference(cfg.lexicon);
    std::unique_ptr<ExternalTriggerBackend> external;
    TriggerBackend* backend = &reference;
    if (opts.backend_trig == "external") {
        external = std::make_unique<ExternalTriggerBackend>(*conn);
        backend = external.get();
    }

    auto stream =
        load_corpus(corpus_path, detect_corpus_format(corpus_path,
                                                      opts.corpus_format));
    auto next_body = [&]() -> std::optional<EmailBody> {
        while (auto email = stream->next()) {
            try {
                return extract_body(*email);
            } catch (const EmptyBody&) {
                continue;
            }
        }
        return std::nullopt;
    };

    std::string label = opts.corpus_label.empty()
                            ? fs::path(corpus_path).filename().string()
                            : opts.corpus_label;
    CorpusBaseline baseline = fit_baseline(next_body, *backend, label);
    std::string out = baseline.to_json() + "\n";
    if (!opts.out_path.empty()) {
        std::ofstream f(opts.out_path, std::ios::binary);
        if (!f) throw InputError("cannot write " + opts.out_path);
        f << out;
    } else {
        std::cout << out;
    }
    std::cerr << "fitted baseline over n_emails=" << baseline.n_emails << "\n";
    return 0;
}

int cmd_label_sample(const Options& opts, const std::string& corpus_path) {
    if (opts.sample < 1) throw InputError("--sample must be >= 1");
    auto stream =
        load_corpus(corpus_path, detect_corpus_format(corpus_path,
                                                      opts.corpus_format));
    std::vector<RawEmail> sampled =
        sample_corpus(*stream, opts.sample, opts.seed);
    if (sampled.size() < opts.sample) {
        std::cerr << "warning: corpus has only " << sampled.size()
                  << " emails (asked for " << opts.sample << ")\n";
    }
    for (const RawEmail& email : sampled) {
        EmailBody body;
        try {
            body = extract_body(email);
        } catch (const EmptyBody&) {
            std::cerr << "warning: skipping " << email.id << " (empty body)\n";
            continue;
        }
        for (const Sentence& s : body.sentences) {
            nlohmann::json j;
            j["email_id"] = email.id;
            j["sentence_index"] = s.index;
            j["text"] = s.text;
            j["labels"] = nlohmann::json::array();
            std::cout << j.dump() << "\n";
        }
    }
    return 0;
}

int cmd_evaluate(const Options& opts, const std::string& labels_path) {
    if (opts.task != "triggers" && opts.task != "intents") {
        throw InputError("--task must be triggers or intents");
    }
    auto conn = open_connection(opts);
    AnalyzerConfig cfg = build_analyzer_config(opts);

    std::vector<LabeledExample> examples =
        load_labeled_jsonl(read_file_or_stdin(labels_path));

    ClassMetrics metrics;
    if (opts.task == "triggers") {
        LexiconTriggerBackend reference(cfg.lexicon);
        std::unique_ptr<ExternalTriggerBackend> external;
        TriggerBackend* backend = &reference;
        if (opts.backend_trig == "external") {
            external = std::make_unique<ExternalTriggerBackend>(*conn);
            backend = external.get();
        }
        run_backend_on_labels(examples, *backend);
        std::vector<std::string> registry;
        for (std::string_view name : kTriggerClassNames) {
            registry.emplace_back(name);
        }
        metrics = evaluate_classification(examples, registry);
    } else {
        RuleIntentBackend reference(cfg.rules);
        std::unique_ptr<ExternalIntentBackend> external;
        IntentBackend* backend = &reference;
        if (opts.backend_intent == "external") {
            external = std::make_unique<ExternalIntentBackend>(*conn, cfg.registry);
            backend = external.get();
        }
        run_backend_on_labels(examples, *backend, cfg.registry);
        metrics = evaluate_classification(examples, cfg.registry.tags());
    }
    std::cout << metrics.to_json() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phishing triage: summarize an email, score cognitive "
                 "triggers, tag intent spans, and render an evidence report"};
    app.require_subcommand(1);

    Options opts;
    std::string input;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--policy-cap,--cap", opts.policy_cap,
                        "Hard summary budget in words");
        cmd->add_option("--policy-fraction,--fraction", opts.policy_fraction,
                        "Summary budget as a fraction of body length "
                        "(e.g. 1/5)");
        cmd->add_option("--z-spike", opts.z_spike,
                        "z-score threshold for trigger spikes");
        cmd->add_option("--lexicon", opts.lexicon_path,
                        "Trigger lexicon TSV (class<TAB>term)");
        cmd->add_option("--rules", opts.rules_path, "Intent rule table JSON");
        cmd->add_option("--tags", opts.tags_path, "Intent tag registry JSON");
        cmd->add_option("--stopwords", opts.stopwords_path,
                        "Stop-word list, one token per line");
        cmd->add_option("--baseline", opts.baseline_path,
                        "Corpus baseline JSON for spike detection");
        cmd->add_option("--backend-summ", opts.backend_summ,
                        "summarizer backend: reference|external");
        cmd->add_option("--backend-trig", opts.backend_trig,
                        "trigger backend: reference|external");
        cmd->add_option("--backend-intent", opts.backend_intent,
                        "intent backend: reference|external");
        cmd->add_option("--transport", opts.transport,
                        "external backend transport: stdio:<cmd> or "
                        "tcp:<host>:<port>");
        cmd->add_option("--timeout-ms", opts.timeout_ms,
                        "per-request backend timeout");
        cmd->add_option("--format", opts.format, "json|text|html")
            ->check(CLI::IsMember({"json", "text", "html"}));
        cmd->add_option("--corpus-format", opts.corpus_format,
                        "auto|mbox|eml_dir|jsonl")
            ->check(CLI::IsMember({"auto", "mbox", "eml_dir", "jsonl"}));
        cmd->add_option("--input-format", opts.input_format, "rfc822|jsonl")
            ->check(CLI::IsMember({"rfc822", "jsonl"}));
        cmd->add_option("--seed", opts.seed, "seed for all sampling");
        cmd->add_option("--sample", opts.sample, "sample size");
        cmd->add_option("--jobs", opts.jobs, "parallel workers for batch");
        cmd->add_option("--config", opts.config_path,
                        "JSON config file (flags win)");
    };

    CLI::App* analyze =
        app.add_subcommand("analyze", "Analyze one email and print a report");
    analyze->add_option("email", input, "email file or - for stdin")
        ->required();
    add_common(analyze);

    CLI::App* batch =
        app.add_subcommand("batch", "Analyze a corpus, one JSONL report per "
                                    "email plus a summary line");
    batch->add_option("corpus", input, "corpus path")->required();
    add_common(batch);

    CLI::App* fit = app.add_subcommand(
        "fit-baseline", "Fit per-class intensity statistics over a corpus");
    fit->add_option("corpus", input, "corpus path")->required();
    fit->add_option("--out", opts.out_path, "output file (default stdout)");
    fit->add_option("--label", opts.corpus_label, "corpus label");
    add_common(fit);

    CLI::App* label = app.add_subcommand(
        "label-sample", "Draw a seeded email sample and emit unlabeled "
                        "sentences for annotation");
    label->add_option("corpus", input, "corpus path")->required();
    add_common(label);

    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "Score a backend against labeled sentences");
    evaluate->add_option("labels", input, "JSONL label file")->required();
    evaluate->add_option("--task", opts.task, "triggers|intents");
    add_common(evaluate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        apply_config(*cmd, opts);
        if (cmd == analyze) return cmd_analyze(opts, input);
        if (cmd == batch) return cmd_batch(opts, input);
        if (cmd == fit) return cmd_fit_baseline(opts, input);
        if (cmd == label) return cmd_label_sample(opts, input);
        if (cmd == evaluate) return cmd_evaluate(opts, input);
    } catch (const BackendError& e) {
        std::cerr << "phishtriage: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "phishtriage: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "phishtriage: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "phishtriage: internal error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
