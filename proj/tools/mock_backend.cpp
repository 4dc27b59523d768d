// Scripted protocol-v1 server for tests and demos. Speaks NDJSON on
// stdio. --mode picks a behaviour:
//   reference    well-formed results for every task (default)
//   reorder      buffer pairs of requests, answer second-first
//   badsum       trigger distributions summing to 0.8
//   renorm       trigger distributions summing to 1.0005
//   oob-span     intent span beyond the sentence length
//   unknown-tag  intent span with an unregistered tag
//   nonjson      reply with a line that is not JSON
//   dup-id       reply twice with the same id
//   error        reply {"error":{...}}
//   slow         sleep 2s before each reply

#include <chrono>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

json make_result(const json& request) {
    std::string task = request.value("task", "");
    const json& payload = request.contains("payload") ? request["payload"]
                                                      : json::object();
    std::size_t n_sentences =
        payload.contains("sentences") && payload["sentences"].is_array()
            ? payload["sentences"].size()
            : 0;
    json result;
    if (task == "summarize") {
        result["selected"] = n_sentences > 0 ? json::array({0}) : json::array();
    } else if (task == "classify_triggers") {
        json dists = json::array();
        for (std::size_t i = 0; i < n_sentences; ++i) {
            dists.push_back({0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0});
        }
        result["distributions"] = std::move(dists);
    } else if (task == "tag_intents") {
        json spans = json::array();
        for (std::size_t i = 0; i < n_sentences; ++i) {
            spans.push_back(json::array());
        }
        result["spans"] = std::move(spans);
    } else {
        result["echo"] = payload;
    }
    return result;
}

json make_response(const json& request, const std::string& mode) {
    json response;
    response["v"] = 1;
    response["id"] = request.value("id", 0);

    std::string task = request.value("task", "");
    const json& payload = request.contains("payload") ? request["payload"]
                                                      : json::object();
    std::size_t n_sentences =
        payload.contains("sentences") && payload["sentences"].is_array()
            ? payload["sentences"].size()
            : 0;

    if (mode == "error") {
        response["error"] = {{"code", "scripted_failure"},
                             {"message", "mock backend refusing task"}};
        return response;
    }
    if (mode == "badsum" && task == "classify_triggers") {
        json dists = json::array();
        for (std::size_t i = 0; i < n_sentences; ++i) {
            dists.push_back({0.2, 0.2, 0.1, 0.1, 0.1, 0.1, 0.0});
        }
        response["result"] = {{"distributions", std::move(dists)}};
        return response;
    }
    if (mode == "renorm" && task == "classify_triggers") {
        json dists = json::array();
        for (std::size_t i = 0; i < n_sentences; ++i) {
            dists.push_back({0.0, 0.0, 0.0, 0.5005, 0.0, 0.5, 0.0});
        }
        response["result"] = {{"distributions", std::move(dists)}};
        return response;
    }
    if (mode == "oob-span" && task == "tag_intents") {
        json spans = json::array();
        for (std::size_t i = 0; i < n_sentences; ++i) {
            spans.push_back(json::array(
                {{{"token_start", 0}, {"token_end", 9999},
                  {"tag", "click_link"}, {"confidence", 1.0}}}));
        }
        response["result"] = {{"spans", std::move(spans)}};
        return response;
    }
    if (mode == "unknown-tag" && task == "tag_intents") {
        json spans = json::array();
        for (std::size_t i = 0; i < n_sentences; ++i) {
            spans.push_back(json::array(
                {{{"token_start", 0}, {"token_end", 1},
                  {"tag", "phone_scam"}, {"confidence", 1.0}}}));
        }
        response["result"] = {{"spans", std::move(spans)}};
        return response;
    }
    response["result"] = make_result(request);
    return response;
}

}  // namespace

int main(int argc, char** argv) {
    std::string mode = "reference";
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--mode" && i + 1 < argc) {
            mode = argv[++i];
        }
    }

    std::vector<json> held;  // for reorder mode
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        json request = json::parse(line, nullptr, false);
        if (request.is_discarded()) {
            std::cout << "{\"v\":1,\"id\":0,\"error\":{\"code\":\"bad_request\","
                         "\"message\":\"unparseable request\"}}\n"
                      << std::flush;
            continue;
        }

        if (mode == "nonjson") {
            std::cout << "this is not json\n" << std::flush;
            continue;
        }
        if (mode == "slow") {
            std::this_thread::sleep_for(std::chrono::seconds(2));
        }
        if (mode == "reorder") {
            held.push_back(std::move(request));
            if (held.size() == 2) {
                std::cout << make_response(held[1], "reference").dump() << "\n";
                std::cout << make_response(held[0], "reference").dump() << "\n"
                          << std::flush;
                held.clear();
            }
            continue;
        }

        json response = make_response(request, mode);
        std::cout << response.dump() << "\n";
        if (mode == "dup-id") {
            std::cout << response.dump() << "\n";
        }
        std::cout << std::flush;
    }
    return 0;
}
