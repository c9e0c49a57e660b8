"""Check how realistic a generator setting is before using it in the pipeline.

Two diagnostics per seed, on the 24 h test split:

* benchmark R^2: a time-of-day average that explains nearly everything means
  the synthetic days barely differ from each other;
* 2D-SND reconstruction R^2: low values mean the envelopes have sharp edges
  that smooth surfaces cannot follow.

    python scripts/calibrate_generator.py --seeds 0 1 2 --set gen.sh_gain=15 gen.home_office_prob=0.3
"""

import argparse

import numpy as np

from flexcast.building import STEP_MIN
from flexcast.config import PipelineConfig, parse_config_text
from flexcast.metrics import r2
from flexcast.ml.models import predict_many
from flexcast.pipeline import approximate, build_dataset, fit_predictor, split


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--set", nargs="*", default=[], metavar="KEY=VALUE",
                    help="config overrides in config-file syntax, e.g. days=8 gen.temp_mean=2")
    args = ap.parse_args()

    per_day = 1440 // STEP_MIN
    base = parse_config_text("\n".join(args.set)) if args.set else PipelineConfig()
    print("seed  benchmark_r2  snd_r2  weather_spread_C")
    for seed in args.seeds:
        cfg = base.updated(seed=seed)
        scenario, _, data = build_dataset(cfg)
        train, test = split(data, cfg)
        bench = fit_predictor("benchmark", train, cfg)
        b = r2(predict_many(bench, test.features), test.targets).value
        snd = approximate(test.envelopes(), ["snd"])["snd"]
        s = r2(snd.reconstructed, test.targets).value
        daily = scenario.temperature[: scenario.days * per_day].reshape(scenario.days, per_day).mean(axis=1)
        print(f"{seed:4d}  {b:12.4f}  {s:6.4f}  {np.ptp(daily):16.2f}")


if __name__ == "__main__":
    main()
