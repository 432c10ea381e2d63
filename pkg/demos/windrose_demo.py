"""From hourly wind samples to a 16-sector windrose.

Builds a synthetic season: mostly westerlies with a southerly spell and a
few calm hours, written as a plain CSV. The histogram uses the reporting
convention where a sector names the direction the wind comes FROM, so
wind blowing toward the East fills the West sector.

Run from the repository root:  python3 demos/windrose_demo.py
"""

import pathlib
from datetime import datetime, timedelta

import numpy as np

from gasbary.ingest import mean_wind, read_wind_csv, windrose
from gasbary.render import render_windrose

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(11)
t0 = datetime(2021, 6, 1)
rows = ["timestamp,u,v"]
for h in range(24 * 14):
    ts = (t0 + timedelta(hours=h)).isoformat()
    if h % 24 < 3:
        u, v = 0.05, 0.0  # calm nights
    elif h < 24 * 10:
        u, v = rng.normal(5.0, 1.0), rng.normal(0.0, 0.8)  # westerlies
    else:
        u, v = rng.normal(0.0, 0.8), rng.normal(4.0, 1.0)  # southerly spell
    rows.append(f"{ts},{u:.3f},{v:.3f}")
csv = OUT / "wind.csv"
csv.write_text("\n".join(rows) + "\n")

recs = read_wind_csv(csv)
u, v = mean_wind(recs)
print(f"{len(recs)} hourly records, mean wind ({u:.2f}, {v:.2f}) m/s")

week1 = mean_wind(recs, ("2021-06-01T00:00:00", "2021-06-08T00:00:00"))
print(f"first-week mean ({week1[0]:.2f}, {week1[1]:.2f}) m/s")

hist = windrose(recs)
top = int(np.argmax(hist.frequencies))
print(f"calm fraction {hist.calm_fraction:.1%}; "
      f"dominant sector index {top} with {hist.frequencies[top]:.1%}")
render_windrose(hist, OUT / "windrose.ppm")
print(f"wrote {csv} and {OUT}/windrose.ppm")
