// Stand-in external model speaking the newline-delimited JSON protocol.
//
//   mock_regressor linear-bounded   y = clamp(W x + b, -15, 85), R^4 -> R^3
//   mock_regressor hang             handshake, then never replies
//   mock_regressor garbage          replies with a line that is not JSON
//   mock_regressor exit             writes to stderr and exits with status 3
//   mock_regressor wrong-id         replies with an id that was never sent

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <string>
#include <thread>
#include <vector>

namespace {

constexpr int kD = 4;
constexpr int kT = 3;
constexpr double kW[kT][kD] = {{1.0, 0.5, 0.0, -0.5}, {0.0, 1.0, 1.0, 0.5}, {0.5, -1.0, 0.5, 1.0}};
constexpr double kB[kT] = {10.0, 20.0, 30.0};

void reply(long long id, const std::vector<double>& y) {
  nlohmann::json j;
  j["id"] = id;
  j["y"] = y;
  std::cout << j.dump() << '\n' << std::flush;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "linear-bounded";
  std::ios::sync_with_stdio(false);
  std::cout << R"({"input_dim":4,"output_dim":3})" << '\n' << std::flush;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
      return 0;
    }
    if (mode == "exit") {
      std::cerr << "mock: exiting on purpose\n";
      return 3;
    }
    if (mode == "garbage") {
      std::cout << "this is not json\n" << std::flush;
      continue;
    }
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "mock: bad request: " << e.what() << '\n';
      return 2;
    }
    const long long id = req.at("id").get<long long>();
    const auto x = req.at("x").get<std::vector<double>>();
    if (x.size() != kD) {
      std::cerr << "mock: expected " << kD << " inputs, got " << x.size() << '\n';
      return 2;
    }
    if (mode == "wrong-id") {
      reply(id + 1000000, std::vector<double>(kT, 0.0));
      continue;
    }
    std::vector<double> y(kT);
    for (int i = 0; i < kT; ++i) {
      double v = kB[i];
      for (int j = 0; j < kD; ++j) v += kW[i][j] * x[j];
      y[i] = std::clamp(v, -15.0, 85.0);
    }
    reply(id, y);
  }
  return 0;
}
