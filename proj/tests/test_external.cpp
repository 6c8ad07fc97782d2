#include <doctest.h>

#include <string>

#include "fairhpo/evaluators.hpp"

using namespace fairhpo;

namespace {

const std::string kTrainer = STUB_TRAINER_PATH;

EvaluationRequest simple_request(std::uint64_t seed = 1) {
  Configuration config;
  config.id = 7;
  config.assignments["model"] = std::string("external");
  config.assignments["rate"] = 0.25;
  config.assignments["depth"] = std::int64_t{4};
  return {config, 0.5, seed, {}};
}

}  // namespace

TEST_SUITE_BEGIN("external");

TEST_CASE("loopback trainer returns its constant metrics") {
  ExternalEvaluator evaluator({kTrainer + " --accuracy 0.5 --fairness 0.5", 1, 30.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  REQUIRE(outcome.ok);
  CHECK(outcome.result.accuracy == 0.5);
  CHECK(outcome.result.fairness == 0.5);
}

TEST_CASE("one process serves many sequential requests") {
  ExternalEvaluator evaluator({kTrainer + " --mode echo-budget", 1, 30.0});
  for (double budget : {0.1, 0.25, 1.0}) {
    EvaluationRequest request = simple_request();
    request.budget_fraction = budget;
    const EvalOutcome outcome = evaluator.evaluate(request);
    REQUIRE(outcome.ok);
    CHECK(outcome.result.accuracy == doctest::Approx(budget));
    CHECK(outcome.result.fairness == doctest::Approx(1.0 - budget / 2.0));
  }
}

TEST_CASE("missing response field names the field") {
  ExternalEvaluator evaluator({kTrainer + " --mode missing-field", 1, 30.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("fairness") != std::string::npos);
}

TEST_CASE("trainer-reported errors propagate") {
  ExternalEvaluator evaluator({kTrainer + " --mode error", 1, 30.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("refuses") != std::string::npos);
}

TEST_CASE("malformed JSON is a protocol error") {
  ExternalEvaluator evaluator({kTrainer + " --mode bad-json", 1, 30.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("malformed") != std::string::npos);
}

TEST_CASE("metrics outside [0,1] are rejected") {
  ExternalEvaluator evaluator({kTrainer + " --mode out-of-range", 1, 30.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("[0,1]") != std::string::npos);
}

TEST_CASE("trainer exiting mid-request yields an exit diagnostic") {
  ExternalEvaluator evaluator({kTrainer + " --mode crash", 1, 30.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("mid-request") != std::string::npos);
  CHECK(outcome.error.find("status 3") != std::string::npos);
  // the pool recovers with a fresh process on the next call
  const EvalOutcome next = evaluator.evaluate(simple_request(2));
  CHECK_FALSE(next.ok);
}

TEST_CASE("hanging trainer hits the configured timeout") {
  ExternalEvaluator evaluator({kTrainer + " --mode hang", 1, 0.4});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
  CHECK(outcome.error.find("timed out") != std::string::npos);
}

TEST_CASE("a command that cannot start reports end of stream") {
  ExternalEvaluator evaluator({"/nonexistent/trainer-binary", 1, 5.0});
  const EvalOutcome outcome = evaluator.evaluate(simple_request());
  CHECK_FALSE(outcome.ok);
}

TEST_SUITE_END();
