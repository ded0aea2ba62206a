"""Regenerate the bundled boundary documents in src/epidiff/data/.

Country outlines come from the ``countryinfo`` wheel (MIT licensed; the
outlines derive from Natural Earth 1:110m, public domain). Bavaria has no
bundled source, so it is the intersection of the Germany outline with a
hand-digitized polygon that traces the Bavarian borders with
Baden-Wuerttemberg, Hesse, Thuringia and Saxony. Treat it as approximate.

Usage: python scripts/build_geodata.py path/to/countryinfo-*.whl
Requires shapely (build time only).
"""
import json
import sys
import zipfile
from pathlib import Path

from shapely.geometry import Polygon, mapping, shape

OUT = Path(__file__).resolve().parents[1] / "src" / "epidiff" / "data"

# inner border, north-east (Saxony/Czech corner) to Lake Constance, lon/lat
BAVARIA_INNER_BORDER = [
    (12.20, 50.32), (11.90, 50.42), (11.50, 50.45), (11.20, 50.36),
    (10.75, 50.36), (10.45, 50.45), (10.05, 50.56), (9.95, 50.55),
    (9.75, 50.42), (9.50, 50.24), (9.20, 50.12), (9.00, 50.06),
    (9.03, 49.85), (9.10, 49.65), (9.35, 49.65), (9.60, 49.65),
    (10.10, 49.50), (10.15, 49.25), (10.45, 49.00), (10.45, 48.70),
    (10.10, 48.45), (10.05, 48.00), (10.00, 47.75), (9.75, 47.60),
    (9.60, 47.50),
]
# closes the polygon well outside Germany to the south and east
BAVARIA_CLOSURE = [(9.60, 46.50), (14.50, 46.50), (14.50, 50.32)]


def _round(geom):
    def walk(c):
        if isinstance(c[0], (int, float)):
            return [round(c[0], 6), round(c[1], 6)]
        return [walk(x) for x in c]

    g = mapping(geom)
    return {"type": g["type"], "coordinates": walk(g["coordinates"])}


def _country(wheel, name):
    with zipfile.ZipFile(wheel) as zf:
        data = json.loads(zf.read(f"countryinfo/data/{name}.json"))
    return shape(data["geoJSON"]["features"][0]["geometry"])


def _feature(geom, name, level):
    return {"type": "Feature", "properties": {"name": name, "level": level}, "geometry": _round(geom)}


def main(wheel):
    OUT.mkdir(parents=True, exist_ok=True)
    germany = _country(wheel, "germany")
    bavaria = germany.intersection(Polygon(BAVARIA_INNER_BORDER + BAVARIA_CLOSURE))
    cameroon = _country(wheel, "cameroon")
    docs = {
        "germany.geojson": [_feature(germany, "Germany", 0), _feature(bavaria, "Bavaria", 1)],
        "cameroon.geojson": [_feature(cameroon, "Cameroon", 0)],
    }
    for fname, features in docs.items():
        doc = {"type": "FeatureCollection", "features": features}
        (OUT / fname).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"Bavaria / Germany area ratio: {bavaria.area / germany.area:.3f}")


if __name__ == "__main__":
    main(sys.argv[1])
