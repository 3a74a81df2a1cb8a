#!/usr/bin/env python3
"""Build a synthetic fixture corpus for the console test gateways.

Usage: build_fixture.py {junction|ring} OUT_DIR

Writes the corpus (manifest + pano images) into OUT_DIR and prints a JSON
object with the manifest path and the matching demo path waypoints.
"""
import json
import sys
from pathlib import Path

from streetloom import synthetic as syn

FIXTURES = {
    "junction": lambda: (syn.junction_rows(), syn.junction_path()),
    "ring": lambda: (syn.ring_rows(), syn.ring_path()),
}


def main() -> int:
    fixture, out_dir = sys.argv[1], Path(sys.argv[2])
    rows, path = FIXTURES[fixture]()
    manifest = syn.write_corpus(rows, out_dir)
    waypoints = [[w.lat, w.lon, w.alt] for w in path.waypoints]
    print(json.dumps({"manifest": str(manifest), "waypoints": waypoints}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
