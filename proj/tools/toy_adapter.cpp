// paretohqd-toy-adapter: reference subprocess adapter speaking the line
// protocol on stdin/stdout, backed by the synthetic toy scorer, generator
// and a trainer that only acknowledges requests.

#include <signal.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "paretohqd/dataset_io.hpp"
#include "paretohqd/synthetic.hpp"

using namespace paretohqd;

namespace {

struct DieOptions {
  std::size_t after = 0;
  std::string marker;
  bool kill_parent = false;
};

// Simulated crash: once `after` requests are answered, and only while the
// marker file does not exist yet.
void maybe_die(const DieOptions& die, std::size_t answered) {
  if (die.after == 0 || answered < die.after) return;
  if (!die.marker.empty()) {
    if (std::filesystem::exists(die.marker)) return;
    std::ofstream(die.marker) << "died after " << answered << "\n";
  }
  if (die.kill_parent) ::kill(::getppid(), SIGKILL);
  ::raise(SIGKILL);
}

int serve(const std::function<json(const json&)>& handle, const DieOptions& die) {
  std::string line;
  std::size_t answered = 0;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json response;
    try {
      response = handle(json::parse(line));
    } catch (const std::exception& e) {
      std::cerr << "paretohqd-toy-adapter: " << e.what() << "\n";
      return 1;
    }
    std::cout << response.dump() << "\n" << std::flush;
    maybe_die(die, ++answered);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference subprocess adapter backed by the toy world"};
  app.require_subcommand(1);
  DieOptions die;
  app.add_option("--die-after", die.after, "Kill this process after N answers");
  app.add_option("--die-marker", die.marker, "Only die while this file is absent; create it");
  app.add_flag("--kill-parent", die.kill_parent, "Kill the parent process as well");

  std::string shape = "concave_sqrt";
  auto* score = app.add_subcommand("score", "Decode toy responses into rewards");
  score->add_option("--shape", shape, "World front shape");

  std::string train_file;
  std::uint64_t seed = 0;
  auto* generate = app.add_subcommand("generate", "Sample toy responses near a training set");
  generate->add_option("--train-file", train_file, "Scored training set")->required();
  generate->add_option("--seed", seed, "Generator seed");

  auto* train = app.add_subcommand("train", "Acknowledge training requests");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    if (*score) {
      const synthetic::ToyScorer scorer(synthetic::front_shape_from_string(shape));
      return serve([&](const json& r) { return scorer(r); }, die);
    }
    if (*generate) {
      const Dataset training = read_dataset_file(train_file, 2);
      const synthetic::ToyGenerator gen(training, seed);
      return serve([&](const json& r) { return gen(r); }, die);
    }
    if (*train) {
      return serve(
          [](const json& r) {
            if (!r.contains("train_file") || !std::filesystem::exists(r["train_file"].get<std::string>())) {
              return json{{"status", "error"}, {"message", "training file not found"}};
            }
            return json{{"status", "ok"}, {"train_file", r["train_file"]}};
          },
          die);
    }
  } catch (const std::exception& e) {
    std::cerr << "paretohqd-toy-adapter: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
