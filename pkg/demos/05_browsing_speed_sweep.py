"""
Sweeping the browsing speed
===========================

How fast should a reader page through a stack?  Too slow and the lesion
never reaches the temporal frequencies the visual system amplifies; too
fast and the whole stack blurs.  A sweep runs the identical virtual
trial at each browsing speed and reports mean AUC with an error bar, so
the speed/performance curve falls out of one command.

Results land in demos/output/ as a CSV and a self-contained SVG plot,
the same artifacts the command line tool produces.
"""

from pathlib import Path

from cinecho.config import DEFAULTS, config_hash, geometry_from, lesion_from
from cinecho.harness import SweepSpec, emit_csv, emit_svg_plot, run_sweep
from cinecho.stacks import generate_dataset

config = dict(DEFAULTS)
# trimmed for a quick run: 60 pairs over 3 subsets leaves 20 per class
# per reader, above the 16 the default channel count needs
config.update({
    "generator.n_pairs": 60,
    "generator.lesion_amplitude": 60.0,
    "trial.n_readers": 2,
    "trial.min_per_class": 6,
})

dataset = generate_dataset(geometry_from(config), config["generator.n_pairs"],
                           lesion_from(config), config["generator.seed"],
                           config["generator.texture"],
                           config["generator.beta"])
print(f"{len(dataset.pairing)} pairs generated, "
      f"config hash {config_hash(config)}")

spec = SweepSpec("slice_rate", (5.0, 15.0, 25.0, 35.0, 45.0))
rows = run_sweep(dataset, spec, config)

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)
csv_path = emit_csv(rows, out / "browsing_speed.csv")
svg_path = emit_svg_plot(rows, [], out / "browsing_speed.svg",
                         axis_label="slice rate [1/s]")

print(f"\n{'rate':>6} {'mean AUC':>9} {'stddev':>8}")
for row in rows:
    print(f"{row.axis_value:6.0f} {row.mean_auc:9.3f} {row.auc_stddev:8.3f}")
best = max(rows, key=lambda r: r.mean_auc)
print(f"\nbest of the grid: {best.mean_auc:.3f} at "
      f"{best.axis_value:.0f} slice/s")
print(f"wrote {csv_path} and {svg_path}")
