// Reference implementation of the external-trainer wire protocol, doubling as
// a test fixture. Reads one JSON request per line on stdin and answers one
// JSON response per line on stdout until stdin closes.
//
// Request : {"config": {...}, "budget": f, "seed": n, "phase": "train_eval"}
// Response: {"accuracy": a, "fairness": f}  or  {"error": "message"}
//
// Modes exercise the client's failure handling:
//   constant (default)  fixed metrics (--accuracy/--fairness)
//   echo-budget         accuracy = budget fraction, fairness = 1 - budget/2
//   error               {"error": "stub trainer refuses"}
//   missing-field       response without the fairness field
//   bad-json            a line that is not JSON
//   out-of-range        accuracy outside [0,1]
//   crash               exits mid-request without answering
//   hang                never answers (for timeout tests)

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
  std::string mode = "constant";
  double accuracy = 0.5, fairness = 0.5;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--mode" && i + 1 < argc) mode = argv[++i];
    else if (arg == "--accuracy" && i + 1 < argc) accuracy = std::stod(argv[++i]);
    else if (arg == "--fairness" && i + 1 < argc) fairness = std::stod(argv[++i]);
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    nlohmann::json request;
    try {
      request = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::cout << nlohmann::json{{"error", std::string("bad request: ") + e.what()}}.dump()
                << std::endl;
      continue;
    }

    if (mode == "crash") return 3;
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(24));
      return 0;
    }

    nlohmann::json response;
    if (mode == "error") {
      response["error"] = "stub trainer refuses";
    } else if (mode == "missing-field") {
      response["accuracy"] = accuracy;
    } else if (mode == "bad-json") {
      std::cout << "this is not json" << std::endl;
      continue;
    } else if (mode == "out-of-range") {
      response["accuracy"] = 1.5;
      response["fairness"] = fairness;
    } else if (mode == "echo-budget") {
      const double budget = request.value("budget", 1.0);
      response["accuracy"] = budget;
      response["fairness"] = 1.0 - budget / 2.0;
    } else {
      response["accuracy"] = accuracy;
      response["fairness"] = fairness;
    }
    std::cout << response.dump() << std::endl;
  }
  return 0;
}
