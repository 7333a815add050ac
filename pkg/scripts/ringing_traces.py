#!/usr/bin/env python3
"""Generate example optomechanical ringing traces of the dressed frequency.

Writes one column per probe detuning so the detuning-dependent damping
(anti-damping above resonance) is directly visible in a plot.
"""

import argparse
from pathlib import Path

import numpy as np

from squeezesim import CavityParams, opto_ringing_trace


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amp-hz", type=float, default=5e4)
    ap.add_argument("--tau0-us", type=float, default=10.0)
    ap.add_argument("--out", default="ringing.csv")
    args = ap.parse_args()

    cav = CavityParams()
    t = np.linspace(0.0, 60e-6, 1200)
    detunings = (-0.5, 0.0, +0.5)  # units of kappa/2
    traces = [opto_ringing_trace(d * cav.kappa / 2.0, t, cav,
                                 amp=args.amp_hz, tau0=args.tau0_us * 1e-6)
              for d in detunings]

    header = "t_us," + ",".join(f"detuning_{d:+.1f}_kappa2" for d in detunings)
    lines = [header]
    for i, ti in enumerate(t):
        row = [f"{ti * 1e6:.3f}"] + [f"{tr[i]:.6g}" for tr in traces]
        lines.append(",".join(row))
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out} ({len(t)} samples, detunings "
          f"{detunings} x kappa/2)")


if __name__ == "__main__":
    main()
