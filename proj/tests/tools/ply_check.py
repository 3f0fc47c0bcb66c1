"""Loads a seed PLY with the plyfile package and prints its vertex layout and end points as JSON."""
import json
import sys

from plyfile import PlyData


def main(path):
    ply = PlyData.read(path)
    vertex = ply["vertex"]
    names = [p.name for p in vertex.properties]
    types = [vertex.data.dtype[n].str for n in names]
    rows = vertex.data

    def row(i):
        return [float(rows[i][n]) for n in names]

    print(json.dumps({
        "text": bool(ply.text),
        "byte_order": ply.byte_order,
        "count": int(vertex.count),
        "names": names,
        "types": types,
        "first": row(0),
        "last": row(vertex.count - 1),
    }))


if __name__ == "__main__":
    main(sys.argv[1])
