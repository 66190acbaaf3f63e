"""Emit self-contained matplotlib scripts for step-record CSVs.

The numerical core never imports a graphics stack. A script embeds the data
it needs and is executed in a subprocess when an image is requested.
"""
from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

from .errors import NsFilterError
from .records import Table, read_records

_TEMPLATE = '''\
# generated by nsfilter {version}; source: {source}
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

nan = math.nan
DATA = {data!r}
MODES = {modes!r}
CONTINUOUS = {continuous!r}

n_panels = 1 + len(MODES)
fig, axes = plt.subplots(n_panels, 1, figsize=(7, 2.4 * n_panels), sharex=True, squeeze=False)
axes = axes[:, 0]
x = DATA["time"] if CONTINUOUS else DATA["step"]
ax = axes[0]
if CONTINUOUS:
    ax.semilogy(x, DATA["rel_err_l2"], lw=1, label="relative l2 error")
else:
    ax.semilogy(x, DATA["err_sq_H0"], lw=1, label="squared error")
    ax.semilogy(x, DATA["upper_bound"], "k--", lw=1, label="upper bound")
    ax.semilogy(x, DATA["lower_bound"], "k:", lw=1, label="lower bound")
ax.legend(fontsize=7, loc="upper right")
for i, k in enumerate(MODES, start=1):
    ax = axes[i]
    ax.plot(x, DATA["m%d_truth_re" % i], lw=1, label="truth")
    ax.plot(x, DATA["m%d_est_re" % i], lw=1, label="estimate")
    if not CONTINUOUS:
        ax.plot(x, DATA["m%d_obs_re" % i], ".", ms=2, label="observation")
    ax.set_ylabel("Re u(%d,%d)" % k)
    ax.legend(fontsize=7, loc="upper right")
axes[-1].set_xlabel("time" if CONTINUOUS else "assimilation step")
fig.tight_layout()
fig.savefig({image!r}, dpi=120)
'''


def _series(table: Table, name: str) -> list[float]:
    return [float(v) for v in table.column(name)]


def plot_script(table: Table, image: str | Path, source: str = "") -> tuple[str, int]:
    """Script text for ``table`` and the number of panels it draws."""
    from . import __version__

    modes = table.tracked_modes
    names = ["step", "time"]
    names += ["rel_err_l2"] if table.is_continuous else ["err_sq_H0", "upper_bound", "lower_bound"]
    for i in range(1, len(modes) + 1):
        names += [f"m{i}_truth_re", f"m{i}_est_re"] + ([] if table.is_continuous else [f"m{i}_obs_re"])
    data = {n: _series(table, n) for n in names}
    text = _TEMPLATE.format(version=__version__, source=source, data=data, modes=modes,
                            continuous=table.is_continuous, image=str(image))
    return text, 1 + len(modes)


def emit(csv_path: str | Path, out_dir: str | Path, render: bool = True) -> tuple[Path, Path | None, int]:
    """Write ``<stem>_plot.py`` next to the outputs and optionally run it to produce ``<stem>.png``."""
    csv_path = Path(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = read_records(csv_path)
    image = out_dir / f"{csv_path.stem}.png"
    script, panels = plot_script(table, image.name, csv_path.name)
    script_path = out_dir / f"{csv_path.stem}_plot.py"
    script_path.write_text(script, encoding="utf-8")
    if not render:
        return script_path, None, panels
    env = dict(os.environ, MPLBACKEND="Agg")
    proc = subprocess.run([sys.executable, script_path.name], cwd=out_dir, env=env,
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise NsFilterError(f"plot script failed: {proc.stderr.strip().splitlines()[-1] if proc.stderr else ''}")
    return script_path, image, panels
