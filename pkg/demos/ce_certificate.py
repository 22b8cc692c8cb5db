"""Check whether the empirical play of a small game is a correlated equilibrium."""
from pathlib import Path

from helpersel.experiments import certify_ce, load_scenario

root = Path(__file__).parent.parent / "scenarios"
for name in ("ce_small.toml", "oscillation.toml"):
    verdict = certify_ce(load_scenario(root / name))
    status = "certified" if verdict.passed else f"{len(verdict.violations)} violations"
    print(f"{name}: max deviation gain {verdict.max_gain:.3f}, tolerance {verdict.tolerance:.3f} -> {status}")
    for v in verdict.violations[:3]:
        print(f"   peer {v.peer}: {v.action} -> {v.alternative} gains {v.gain:.2f}")
