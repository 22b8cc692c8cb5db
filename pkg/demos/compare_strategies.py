"""Same capacity path, three decision rules.

Seeds split into an environment stream and a play stream, so every strategy
faces exactly the same helper capacities.
"""
from dataclasses import replace
from pathlib import Path

from helpersel.experiments import compare_strategies, load_scenario

scenario = load_scenario(Path(__file__).parent.parent / "scenarios" / "baseline.toml")
scenario = replace(scenario, replications=3, out=None, config=replace(scenario.config, horizon=4000))

rows = compare_strategies(scenario, ["rths", "r2hs", "best-response"])
keys = ["strategy", "welfare_ratio", "jain_helpers", "mean_server_load",
        "final_worst_regret_rel", "switching_rate"]
print("  ".join(f"{k[:14]:>14}" for k in keys))
for row in rows:
    print("  ".join(f"{row[k]:>14.4f}" if isinstance(row[k], float) else f"{row[k]:>14}" for k in keys))
