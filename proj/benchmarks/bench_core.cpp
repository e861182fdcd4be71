#include <benchmark/benchmark.h>

#include <random>

#include "medguard/record.hpp"
#include "medguard/reliability.hpp"
#include "medguard/secure_channel.hpp"
#include "medguard/sha256.hpp"

namespace {

using namespace medguard;

void BM_Sha256(benchmark::State& state) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(1);
  for (auto& b : data) b = static_cast<std::uint8_t>(rng());
  for (auto _ : state) benchmark::DoNotOptimize(sha256::digest(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(1024)->Arg(64 << 10)->Arg(1 << 20);

HealthRecord day_record(std::size_t readings) {
  HealthRecord r;
  r.patient_id = "patient-1";
  r.timestamp = 1'546'300'800;
  for (std::size_t i = 0; i < readings; ++i) {
    r.glucose_readings.push_back({TimeOfDay{static_cast<std::uint32_t>(i * 800)}, 120, MealTag::other});
  }
  r.profile = {{"AC breakfast Mean", "142"}, {"PC dinner Mean", "171"}};
  return r;
}

void BM_SignVerify(benchmark::State& state) {
  const HealthRecord r = day_record(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const SignedBlob blob = sign(r);
    benchmark::DoNotOptimize(verify(blob));
  }
}
BENCHMARK(BM_SignVerify)->Arg(4)->Arg(96);

void BM_SealUnseal(benchmark::State& state) {
  DeterministicRandom rng(1);
  const KeyPair a = generate_keypair(rng.bytes<32>());
  const KeyPair b = generate_keypair(rng.bytes<32>());
  const Principal client = Principal::create("dr", Role::physician, a);
  const Principal server = Principal::create("cloud", Role::cloud, b);
  KeyDirectory dir;
  dir.register_principal(client);
  dir.register_principal(server);
  NonceCache nonces;
  auto [c, s] = handshake(client, server, dir, nonces, rng);
  const Bytes msg(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(s.unseal(c.seal(msg)));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SealUnseal)->Arg(512)->Arg(64 << 10);

void BM_TransientDay(benchmark::State& state) {
  const auto model = reliability::build_generator(reliability::RateTable::table_one());
  const reliability::TransientOptions options{.horizon = 24.0, .step = 0.25, .record_every = 0, .check_convergence = false};
  for (auto _ : state) {
    benchmark::DoNotOptimize(reliability::solve_transient(model, reliability::StateDistribution::unit(12), options));
  }
  state.SetItemsProcessed(state.iterations() * 96);
}
BENCHMARK(BM_TransientDay);

void BM_TransientEndpoint(benchmark::State& state) {
  const auto model = reliability::build_generator(reliability::RateTable::table_one());
  for (auto _ : state) {
    benchmark::DoNotOptimize(reliability::transient_endpoint(model, reliability::StateDistribution::unit(12), 1e9, 0.25));
  }
}
BENCHMARK(BM_TransientEndpoint);

void BM_SteadyState(benchmark::State& state) {
  const auto model = reliability::build_generator(reliability::RateTable::table_one());
  for (auto _ : state) benchmark::DoNotOptimize(reliability::steady_state(model));
}
BENCHMARK(BM_SteadyState);

}  // namespace

BENCHMARK_MAIN();
