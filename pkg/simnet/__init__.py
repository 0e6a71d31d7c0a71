from simnet.scenario import AdversaryPolicy, Duration, Scenario, load_scenario, scenario_from_dict
from simnet.simulator import Trace, hop_clock, run

__all__ = ["AdversaryPolicy", "Duration", "Scenario", "Trace", "hop_clock", "load_scenario", "run",
           "scenario_from_dict"]
