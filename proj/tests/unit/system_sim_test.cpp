#include "medguard/system_sim.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace {

using namespace medguard;
using namespace medguard::sim;
using medguard::testing::error_code_of;
using medguard::testing::random_record;
using medguard::testing::sample_command;
using medguard::testing::sample_record;

class SimulatorTest : public ::testing::Test {
 protected:
  SimulatorTest() : sim(1) {
    sim.register_principal("patient-17", Role::patient, {"patient-17"});
    sim.register_principal("dr-lee", Role::physician, {"patient-17"});
    sim.register_principal("carer", Role::caregiver, {"patient-17"});
    sim.register_principal("res", Role::researcher, {"patient-17"});
    sim.register_principal("res-ok", Role::researcher, {"patient-17"}, true);
  }

  Simulator sim;
};

TEST(ComponentStates, NormalAndSystemFailure) {
  for (const auto& cs : component_states(1)) EXPECT_EQ(cs.status, Status::normal);
  for (const auto& cs : component_states(12)) EXPECT_EQ(cs.status, Status::hw_failed);
  EXPECT_THROW(component_states(13), Error);
}

TEST_F(SimulatorTest, StoreCommitsAndMonitorReturnsTheRecord) {
  const HealthRecord r = sample_record();
  const StoreReceipt receipt = sim.store_flow(r);
  EXPECT_EQ(receipt.status, StoreStatus::committed);
  EXPECT_EQ(sim.cloud().records.count(key_of(r)), 1u);
  EXPECT_TRUE(sim.replicas_consistent());
  EXPECT_EQ(sim.monitor_flow("dr-lee", key_of(r)), r);
  EXPECT_EQ(sim.monitor_flow("patient-17", key_of(r)), r);
  EXPECT_EQ(sim.log().back().kind, "record_valid");
}

TEST_F(SimulatorTest, InvalidRecordIsRefusedBeforeStorage) {
  HealthRecord r = sample_record();
  r.glucose_readings[0].mg_dl = 1001;
  EXPECT_EQ(error_code_of([&] { sim.store_flow(r); }), Errc::invalid_record);
  EXPECT_TRUE(sim.local_store().empty());
}

TEST_F(SimulatorTest, UnknownKeyIsNotFound) {
  EXPECT_EQ(error_code_of([&] { sim.monitor_flow("dr-lee", RecordKey{"patient-17", 5}); }), Errc::not_found);
}

TEST_F(SimulatorTest, CloudOutageQueuesThenDrains) {
  for (int fault : {3, 4}) {
    sim.inject_fault(fault);
    HealthRecord r = sample_record();
    r.timestamp += fault;
    EXPECT_EQ(sim.store_flow(r).status, StoreStatus::queued_channel_down);
    EXPECT_EQ(sim.pending_uploads(), 1u);
    EXPECT_FALSE(sim.replicas_consistent());
    sim.recover();
    EXPECT_EQ(sim.model_state(), 1);
    EXPECT_EQ(sim.pending_uploads(), 0u);
    EXPECT_TRUE(sim.replicas_consistent());
    EXPECT_EQ(sim.monitor_flow("dr-lee", key_of(r)), r);
  }
}

TEST_F(SimulatorTest, ControllerDownRefusesStore) {
  sim.inject_fault(5);
  EXPECT_EQ(error_code_of([&] { sim.store_flow(sample_record()); }), Errc::controller_down);
}

TEST_F(SimulatorTest, CorruptedUploadIsRejectedAndRetried) {
  sim.corrupt_next(Hop::upload);
  const HealthRecord r = sample_record();
  EXPECT_EQ(sim.store_flow(r).status, StoreStatus::rejected_tampered);
  EXPECT_EQ(sim.cloud().records.count(key_of(r)), 0u);
  EXPECT_EQ(sim.pending_uploads(), 1u);
  sim.sync();
  EXPECT_EQ(sim.pending_uploads(), 0u);
  EXPECT_TRUE(sim.replicas_consistent());
}

TEST_F(SimulatorTest, TamperAtRestIsDetectedOnFetch) {
  const HealthRecord r = sample_record();
  sim.store_flow(r);
  sim.tamper_at_rest(key_of(r));
  EXPECT_EQ(error_code_of([&] { sim.monitor_flow("dr-lee", key_of(r)); }), Errc::tamper_detected);
  EXPECT_EQ(sim.log().back().kind, "TamperDetected");
}

TEST_F(SimulatorTest, CorruptedDownloadIsDetected) {
  const HealthRecord r = sample_record();
  sim.store_flow(r);
  sim.corrupt_next(Hop::download);
  EXPECT_EQ(error_code_of([&] { sim.monitor_flow("dr-lee", key_of(r)); }), Errc::tamper_detected);
  EXPECT_EQ(sim.monitor_flow("dr-lee", key_of(r)), r);
}

TEST_F(SimulatorTest, ResearcherNeedsConsent) {
  const HealthRecord r = sample_record();
  sim.store_flow(r);
  EXPECT_EQ(error_code_of([&] { sim.monitor_flow("res", key_of(r)); }), Errc::denied);
  EXPECT_EQ(sim.log().back().kind, "Deny");
  EXPECT_EQ(sim.monitor_flow("res-ok", key_of(r)), r);
}

TEST_F(SimulatorTest, ValidCommandBumpsScheduleVersion) {
  const CommandReceipt receipt = sim.command_flow(sample_command(), "dr-lee");
  EXPECT_EQ(receipt.status, CommandStatus::applied);
  EXPECT_EQ(receipt.schedule_version, 1u);
  EXPECT_EQ(sim.schedule().version, 1u);
  EXPECT_EQ(sim.schedule().entries, sample_command().schedule);
  EXPECT_EQ(sim.log().count("serial_transfer"), 1u);
}

TEST_F(SimulatorTest, TamperedCommandLeavesScheduleAlone) {
  sim.command_flow(sample_command("c1"), "dr-lee");
  for (Hop hop : {Hop::command_uplink, Hop::command_downlink}) {
    sim.corrupt_next(hop);
    PrescriptionCommand c = sample_command("c2", 5000);
    const CommandReceipt receipt = sim.command_flow(c, "dr-lee");
    EXPECT_EQ(receipt.status, CommandStatus::discarded_tampered);
    EXPECT_EQ(sim.schedule().version, 1u);
    EXPECT_EQ(sim.schedule().source_command_id, "c1");
  }
}

TEST_F(SimulatorTest, OverLimitCommandIsRejectedByController) {
  const CommandReceipt receipt = sim.command_flow(sample_command("big", 30'000), "dr-lee");
  EXPECT_EQ(receipt.status, CommandStatus::rejected_limits);
  EXPECT_EQ(sim.schedule().version, 0u);
  EXPECT_EQ(sim.log().back().kind, "LimitExceeded");
}

TEST_F(SimulatorTest, CommandAuthorization) {
  PrescriptionCommand c = sample_command();
  c.issuer = "carer";
  EXPECT_EQ(sim.command_flow(c, "carer").status, CommandStatus::applied);
  c.issuer = "patient-17";
  EXPECT_EQ(error_code_of([&] { sim.command_flow(c, "patient-17"); }), Errc::denied);
  c.issuer = "dr-lee";
  EXPECT_EQ(error_code_of([&] { sim.command_flow(c, "carer"); }), Errc::auth_failure);
  EXPECT_EQ(error_code_of([&] { sim.command_flow(c, "ghost"); }), Errc::auth_failure);
}

TEST_F(SimulatorTest, PumpFaultParksCommandsUntilRecovery) {
  sim.inject_fault(2);
  EXPECT_TRUE(sim.in_safe_hold());
  EXPECT_EQ(sim.command_flow(sample_command(), "dr-lee").status, CommandStatus::parked);
  EXPECT_EQ(sim.parked_commands(), 1u);
  sim.recover();
  EXPECT_EQ(sim.parked_commands(), 0u);
  EXPECT_EQ(sim.schedule().version, 1u);
}

TEST_F(SimulatorTest, SafeHoldDeliversNoDoses) {
  sim.command_flow(sample_command(), "dr-lee");
  sim.advance_to(TimeOfDay::kSecondsPerDay);
  const std::uint64_t delivered = sim.doses_delivered();
  EXPECT_EQ(delivered, 2u);
  for (int path : {2, 5}) {
    sim.inject_fault(path);
    const std::uint64_t held_before = sim.log().count("dose_held");
    sim.advance_to(sim.now() + 3 * TimeOfDay::kSecondsPerDay);
    EXPECT_EQ(sim.doses_delivered(), delivered);
    EXPECT_EQ(sim.log().count("dose_held") - held_before, 6u);
    sim.recover();
  }
  sim.advance_to(sim.now() + TimeOfDay::kSecondsPerDay);
  EXPECT_EQ(sim.doses_delivered(), delivered + 2);
}

TEST_F(SimulatorTest, CloudOnlyOutageKeepsDosing) {
  sim.command_flow(sample_command(), "dr-lee");
  sim.inject_fault(3);
  EXPECT_FALSE(sim.in_safe_hold());
  sim.advance_to(TimeOfDay::kSecondsPerDay);
  EXPECT_EQ(sim.doses_delivered(), 2u);
}

TEST_F(SimulatorTest, DeepFailurePathRecoversToNormal) {
  for (int s : {2, 9, 11, 12}) sim.inject_fault(s);
  EXPECT_EQ(sim.model_state(), 12);
  sim.recover();
  EXPECT_EQ(sim.model_state(), 1);
  EXPECT_FALSE(sim.in_safe_hold());
  const std::set<reliability::Edge> expected{{2, 9}, {9, 11}, {11, 12}, {1, 2}, {12, 1}};
  EXPECT_EQ(sim.exercised_edges(), expected);
}

TEST_F(SimulatorTest, NonEdgesAreIllegal) {
  sim.inject_fault(4);
  EXPECT_EQ(error_code_of([&] { sim.inject_fault(9); }), Errc::illegal_transition);
  EXPECT_EQ(sim.model_state(), 4);
  sim.recover();
  EXPECT_EQ(error_code_of([&] { sim.inject_fault(12); }), Errc::illegal_transition);
  EXPECT_EQ(error_code_of([&] { sim.inject_fault(1); }), Errc::illegal_transition);
  EXPECT_EQ(error_code_of([&] { sim.recover(); }), Errc::illegal_transition);
  sim.inject_fault(3);
  sim.inject_fault(6);
  sim.inject_fault(10);
  EXPECT_EQ(error_code_of([&] { sim.recover(); }), Errc::illegal_transition);
}

TEST_F(SimulatorTest, EveryNonEdgeInjectionIsIllegal) {
  for (int from = 1; from <= 12; ++from) {
    for (int to = 1; to <= 13; ++to) {
      if (reliability::edge_kind(from, to) == reliability::RateKind::failure) continue;
      Simulator fresh(3);
      // Walk to `from` along failure edges when it is reachable that way.
      const std::map<int, std::vector<int>> path{{1, {}},         {2, {2}},        {3, {3}},        {4, {4}},
                                                 {5, {5}},        {6, {3, 6}},     {7, {3, 7}},     {8, {2, 8}},
                                                 {9, {2, 9}},     {10, {3, 6, 10}}, {11, {5, 11}}, {12, {5, 11, 12}}};
      for (int s : path.at(from)) fresh.inject_fault(s);
      ASSERT_EQ(error_code_of([&] { fresh.inject_fault(to); }), Errc::illegal_transition) << from << "->" << to;
      ASSERT_EQ(fresh.model_state(), from);
    }
  }
}

TEST(ScenarioScript, IntegrityExperimentEndsInTamperDetected) {
  const std::string script = R"(
0    dr-lee register physician patients=patient-17
10   mc store patient-17 1546300800 07:00/142/ac_breakfast AC_breakfast_Mean=142
20   dr-lee fetch patient-17 1546300800
30   attacker tamper patient-17 1546300800
40   dr-lee fetch patient-17 1546300800
)";
  const EventLog log = run_scenario(script, 1);
  EXPECT_EQ(log.count("record_valid"), 1u);
  EXPECT_EQ(log.back().kind, "TamperDetected");
}

TEST(ScenarioScript, SameSeedSameLog) {
  const std::string script = R"(
0 dr-lee register physician patients=p1
5 mc store p1 100 08:00/120/ac_breakfast
6 attacker corrupt download
7 dr-lee fetch p1 100
8 dr-lee command c1 p1 08:00/4/1
9 system fault 3
10 mc store p1 200 09:00/130/pc_breakfast
20 system recover
90000 system tick
)";
  const EventLog a = run_scenario(script, 42);
  const EventLog b = run_scenario(script, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_NE(run_scenario(script, 43).to_text(), a.to_text());
}

TEST(ScenarioScript, ErrorsNameTheLine) {
  try {
    run_scenario("0 system fault 2\n1 system fault 4\n", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::script_error);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_EQ(error_code_of([] { run_scenario("0 mc frobnicate\n", 1); }), Errc::script_error);
  EXPECT_EQ(error_code_of([] { run_scenario("5 system tick\n4 system tick\n", 1); }), Errc::script_error);
}

TEST(EventLogFormat, KeyValueLines) {
  EventLog log;
  log.append(7, "pump", "dose", "units=4");
  EXPECT_EQ(log.to_text(), "t=7 seq=0 component=pump event=dose units=4\n");
}

TEST(IntegrityProperty, NoCorruptedRecordIsEverAccepted) {
  Simulator sim(9);
  std::mt19937_64 rng(5150);
  std::map<RecordKey, HealthRecord> committed;
  int detected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    HealthRecord r = random_record(rng);
    r.timestamp = trial;
    sim.register_principal("doc" + std::to_string(trial), Role::physician, {r.patient_id});
    const std::string reader = "doc" + std::to_string(trial);
    switch (rng() % 3) {
      case 0: {
        sim.corrupt_next(Hop::upload);
        ASSERT_EQ(sim.store_flow(r).status, StoreStatus::rejected_tampered);
        ++detected;
        sim.sync();
        break;
      }
      case 1:
        sim.store_flow(r);
        sim.corrupt_next(Hop::download);
        ASSERT_EQ(error_code_of([&] { sim.monitor_flow(reader, key_of(r)); }), Errc::tamper_detected);
        ++detected;
        break;
      default:
        sim.store_flow(r);
        break;
    }
    ASSERT_EQ(sim.monitor_flow(reader, key_of(r)), r);
  }
  EXPECT_GT(detected, 600);
  EXPECT_TRUE(sim.replicas_consistent());
}

}  // namespace
