#!/usr/bin/env python3
"""Regenerates the checked-in fixtures.

catalonia/: 42 areal units with realistic names and populations on a
synthetic rectangular tiling (7 x 6 grid, varying cell sizes). The geometry
is NOT the real comarca geometry; tests only rely on counts, contiguity and
areas.

smoke/: a 10-region dataset (stations, cases, polygons) small enough to run
the whole pipeline in seconds.
"""

import json
import math
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))

COMARQUES = [
    ("alt-camp", "Alt Camp", 44424),
    ("alt-emporda", "Alt Empordà", 140214),
    ("alt-penedes", "Alt Penedès", 108339),
    ("alt-urgell", "Alt Urgell", 20155),
    ("alta-ribagorca", "Alta Ribagorça", 3872),
    ("anoia", "Anoia", 120842),
    ("bages", "Bages", 177462),
    ("baix-camp", "Baix Camp", 190249),
    ("baix-ebre", "Baix Ebre", 77199),
    ("baix-emporda", "Baix Empordà", 132284),
    ("baix-llobregat", "Baix Llobregat", 818883),
    ("baix-penedes", "Baix Penedès", 104473),
    ("barcelones", "Barcelonès", 2285848),
    ("bergueda", "Berguedà", 39274),
    ("cerdanya", "Cerdanya", 18061),
    ("conca-de-barbera", "Conca de Barberà", 19852),
    ("garraf", "Garraf", 147635),
    ("garrigues", "Garrigues", 18880),
    ("garrotxa", "Garrotxa", 56467),
    ("girones", "Gironès", 188504),
    ("maresme", "Maresme", 446872),
    ("moianes", "Moianès", 13483),
    ("montsia", "Montsià", 68297),
    ("noguera", "Noguera", 38226),
    ("osona", "Osona", 158758),
    ("pallars-jussa", "Pallars Jussà", 12914),
    ("pallars-sobira", "Pallars Sobirà", 6896),
    ("pla-de-l-estany", "Pla de l'Estany", 32085),
    ("pla-d-urgell", "Pla d'Urgell", 36862),
    ("priorat", "Priorat", 9180),
    ("ribera-d-ebre", "Ribera d'Ebre", 21610),
    ("ripolles", "Ripollès", 24917),
    ("segarra", "Segarra", 22617),
    ("segria", "Segrià", 209768),
    ("selva", "Selva", 168469),
    ("solsones", "Solsonès", 13639),
    ("tarragones", "Tarragonès", 257454),
    ("terra-alta", "Terra Alta", 11352),
    ("urgell", "Urgell", 36526),
    ("vall-d-aran", "Vall d'Aran", 9983),
    ("valles-occidental", "Vallès Occidental", 923976),
    ("valles-oriental", "Vallès Oriental", 403623),
]

TOTAL_POPULATION = 7619494


def rect(x0, y0, x1, y1):
    return [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]


def grid_tiling(col_widths, row_heights):
    """Cells row-major, bottom-left at (0, 0). Returns (bounds, rook edges)."""
    xs = [0.0]
    for w in col_widths:
        xs.append(xs[-1] + w)
    ys = [0.0]
    for h in row_heights:
        ys.append(ys[-1] + h)
    ncols, nrows = len(col_widths), len(row_heights)
    cells = []
    for r in range(nrows):
        for c in range(ncols):
            cells.append((xs[c], ys[r], xs[c + 1], ys[r + 1]))
    edges = []
    for r in range(nrows):
        for c in range(ncols):
            i = r * ncols + c
            if c + 1 < ncols:
                edges.append((i, r * ncols + c + 1))
            if r + 1 < nrows:
                edges.append((i, (r + 1) * ncols + c))
    return cells, edges


def write_region_files(outdir, rows, cells, edges):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "regions.csv"), "w") as f:
        f.write("id,name,population,area_km2\n")
        for (rid, name, pop), (x0, y0, x1, y1) in zip(rows, cells):
            area = (x1 - x0) * (y1 - y0)
            f.write(f"{rid},{name},{pop},{area:.1f}\n")
    with open(os.path.join(outdir, "neighbors.csv"), "w") as f:
        f.write("id_a,id_b\n")
        for a, b in edges:
            f.write(f"{rows[a][0]},{rows[b][0]}\n")
    features = []
    for (rid, name, _), (x0, y0, x1, y1) in zip(rows, cells):
        features.append({
            "type": "Feature",
            "properties": {"id": rid, "name": name},
            "geometry": {"type": "Polygon", "coordinates": rect(x0, y0, x1, y1)},
        })
    with open(os.path.join(outdir, "regions.geojson"), "w") as f:
        json.dump({"type": "FeatureCollection", "features": features}, f, indent=1)
        f.write("\n")


def make_catalonia():
    rows = sorted(COMARQUES, key=lambda r: r[0])
    total = sum(p for _, _, p in rows)
    delta = TOTAL_POPULATION - total
    rows = [
        (rid, name, pop + (delta if rid == "valles-occidental" else 0))
        for rid, name, pop in rows
    ]
    assert sum(p for _, _, p in rows) == TOTAL_POPULATION
    col_widths = [30, 35, 40, 45, 40, 35, 45]
    row_heights = [35, 40, 45, 40, 45, 50]
    cells, edges = grid_tiling(col_widths, row_heights)
    write_region_files(os.path.join(HERE, "catalonia"), rows, cells, edges)


def make_smoke():
    rng = random.Random(20200825)
    rows = [
        ("r0", "North Port", 52000),
        ("r1", "Harbour", 81000),
        ("r2", "Old Town", 123000),
        ("r3", "Riverside", 201000),
        ("r4", "Hills", 64000),
        ("r5", "Meadows", 92000),
        ("r6", "Lakeside", 151000),
        ("r7", "Forest", 73000),
        ("r8", "Plains", 112000),
        ("r9", "Coast", 99000),
    ]
    cells, edges = grid_tiling([20] * 5, [20] * 2)
    outdir = os.path.join(HERE, "smoke")
    write_region_files(outdir, rows, cells, edges)

    # stations: 25 inside the box (plus margin), 2 far outside for the buffer
    n_days = 56
    stations = []
    for k in range(25):
        stations.append((f"s{k:02d}", rng.uniform(-5, 105), rng.uniform(-5, 45)))
    stations.append(("far0", 400.0, 200.0))
    stations.append(("far1", -350.0, -120.0))

    def field(var, x, y, t):
        if var == "mean_temperature":
            return 12 + 6 * math.sin(2 * math.pi * (t + 20) / 60) + 0.03 * x - 0.02 * y
        if var == "solar_exposure":
            return 8 + 3 * math.sin(2 * math.pi * t / 56) + 0.01 * y
        return max(0.0, 14 + 0.05 * x + 2 * math.cos(2 * math.pi * t / 14))

    noise = {"mean_temperature": 0.4, "solar_exposure": 0.3, "wind_speed": 0.5}
    with open(os.path.join(outdir, "stations.csv"), "w") as f:
        f.write("station_id,x_km,y_km,day,variable,value\n")
        for sid, x, y in stations:
            for day in range(-6, n_days + 1):
                for var in ("solar_exposure", "mean_temperature", "wind_speed"):
                    if day != 0 and rng.random() < 0.02:
                        continue  # the pipeline imputes missing station-days
                    v = field(var, x, y, day) + rng.gauss(0, noise[var])
                    f.write(f"{sid},{x:.3f},{y:.3f},{day},{var},{v:.4f}\n")

    # daily cases: a single-wave curve allocated by population with
    # region-specific multipliers
    mult = [1.0, 1.1, 0.9, 1.5, 0.8, 1.0, 1.2, 0.7, 1.0, 1.3]
    pops = [p for _, _, p in rows]
    total_pop = sum(pops)
    from datetime import date, timedelta

    start = date(2020, 2, 25)
    with open(os.path.join(outdir, "cases.csv"), "w") as f:
        f.write("region_id,date,cases\n")
        for t in range(1, n_days + 1):
            curve = 400 * math.exp(-(((t - 28) / 14.0) ** 2)) + 15
            weights = [p / total_pop * m for p, m in zip(pops, mult)]
            wsum = sum(weights)
            for (rid, _, _), w in zip(rows, weights):
                lam = curve * w / wsum
                # poisson draw by inversion
                u = rng.random()
                s = p = math.exp(-lam)
                k = 0
                while u > s:
                    k += 1
                    p *= lam / k
                    s += p
                f.write(f"{rid},{start + timedelta(days=t - 1)},{k}\n")


if __name__ == "__main__":
    make_catalonia()
    make_smoke()
    print("fixtures written")
