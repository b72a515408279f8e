#!/usr/bin/env python3
"""Regenerates the bundled building models.

Layered elements are discretized into slices with the capacity at the slice
centre; surface nodes are massless. Each zone has a massless radiant node that
stands in for long-wave exchange between its inner surfaces.

    python3 models/generate.py models/
"""

import json
import sys
from pathlib import Path

RHO_AIR, CP_AIR = 1.2, 1000.0
H_OUT, H_CONV, H_RAD = 25.0, 2.5, 5.0
STEEL = (0.0005, 50.0, 3.9e6, 1)  # thickness m, λ W/mK, ρc J/m³K, slices


class Circuit:
    def __init__(self):
        self.nodes, self.branches, self.flows, self.zones = [], [], [], []

    def node(self, node_id, capacity):
        self.nodes.append({"id": node_id, "capacity": capacity})
        return node_id

    def branch(self, frm, to, g, source=None):
        b = {"id": f"g{len(self.branches) + 1}", "from": frm, "to": to, "conductance": g}
        if source:
            b["temperature_source"] = source
        self.branches.append(b)

    def slices(self, name, area, layers, left, right):
        prev, pending = left, None
        for li, (d, lam, rc, n) in enumerate(layers):
            dx = d / n
            for j in range(n):
                c = self.node(f"{name}_{li}_{j}", rc * dx * area)
                half = lam / (dx / 2) * area
                self.branch(prev, c, half if pending is None else 1.0 / (1.0 / pending + 1.0 / half))
                prev, pending = c, half
        self.branch(prev, right, pending)

    def envelope(self, name, area, layers, source, air, mrt, h_out=H_OUT):
        """Outside boundary -> layers (outside first) -> inner surface -> air and radiant node."""
        so = self.node(f"{name}_so", 0.0)
        si = self.node(f"{name}_si", 0.0)
        self.branch("REF", so, h_out * area, source)
        self.slices(name, area, layers, so, si)
        self.surface(si, area, air, mrt)

    def surface(self, si, area, air, mrt):
        self.branch(si, air, H_CONV * area)
        self.branch(si, mrt, H_RAD * area)

    def window(self, name, area, u_value, source, air, mrt):
        w = self.node(name, 0.0)
        self.branch("REF", w, area / (1.0 / u_value - 1.0 / (H_CONV + H_RAD)), source)
        self.surface(w, area, air, mrt)

    def dump(self, path):
        doc = {"nodes": self.nodes, "branches": self.branches,
               "flow_sources": self.flows, "zones": self.zones}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def bungalow():
    """Single-zone steel-panel bungalow on a timber deck over soil; T_o is the only boundary."""
    c = Circuit()
    volume, floor = 13.5 * 2.5, 13.5
    air = c.node("air", RHO_AIR * CP_AIR * volume)
    mrt = c.node("mrt", 0.0)
    pu = lambda d: (d, 0.025, 5.6e4, 3)
    c.envelope("wall", 37.6, [STEEL, pu(0.022), STEEL], "T_o", air, mrt)
    c.envelope("ceil", floor, [STEEL, pu(0.06), STEEL], "T_o", air, mrt)
    soil, eps, deck = (0.5, 1.5, 2.0e6, 3), (0.08, 0.035, 4.35e4, 1), (0.022, 0.13, 8e5, 1)
    c.envelope("floor", floor, [soil, eps, deck], "T_o", air, mrt, h_out=1000.0)
    c.window("win", 3.88, 2.8, "T_o", air, mrt)
    c.branch("REF", air, RHO_AIR * CP_AIR * volume * 0.5 / 3600.0, "T_o")
    c.flows.append({"node": air, "source_name": "P"})
    c.zones.append({"id": "zone", "air_node": air, "floor_area": floor, "air_mass": RHO_AIR * volume})
    return c


def house():
    """Two-storey brick house with external insulation; slab on ground at T_g."""
    c = Circuit()
    volumes = {"gf": 260.0, "ff": 242.0}
    floor, glazing = 93.3, 12.0
    wall = 38.6 * 2.7 - glazing
    brick, wool = (0.18, 0.8, 1.6e6, 2), (0.15, 0.04, 3.0e4, 1)
    rooms = {}
    for z, v in volumes.items():
        # air node carries air plus furnishings
        air = c.node(f"{z}_air", 3.0 * RHO_AIR * CP_AIR * v)
        mrt = c.node(f"{z}_mrt", 0.0)
        rooms[z] = (air, mrt)
        c.envelope(f"{z}_wall", wall, [wool, brick], "T_o", air, mrt)
        c.window(f"{z}_win", glazing, 0.8, "T_o", air, mrt)
        c.branch("REF", air, RHO_AIR * CP_AIR * v * 0.1 / 3600.0, "T_o")
        c.flows.append({"node": air, "source_name": f"P_{z}"})
        c.zones.append({"id": z, "air_node": air, "floor_area": floor, "volume": v})
    c.envelope("slab", floor, [(0.31, 0.035, 4.35e4, 1), (0.25, 2.3, 2.3e6, 2)], "T_g", *rooms["gf"], h_out=1000.0)
    c.envelope("roof", floor, [(0.54, 0.04, 3.0e4, 2), (0.02, 0.25, 8e5, 1)], "T_o", *rooms["ff"])
    lower, upper = c.node("mid_gf_si", 0.0), c.node("mid_ff_si", 0.0)
    c.surface(lower, floor, *rooms["gf"])
    c.surface(upper, floor, *rooms["ff"])
    c.slices("mid", floor, [(0.20, 2.3, 2.3e6, 2)], lower, upper)
    c.branch(rooms["gf"][0], rooms["ff"][0], RHO_AIR * CP_AIR * 0.02)  # stairwell exchange
    return c


def ladder5():
    """Four-slice wall and a light room (five states); the room also loses heat to an adjacent space."""
    c = Circuit()
    air = c.node("air", 5.0e4)
    c.branch("REF", air, 10.0, "T_o")
    c.branch("REF", air, 4.0, "T_adj")
    c.slices("wall", 20.0, [(0.2, 0.5, 1.2e6, 4)], c.node("out", 0.0), air)
    c.branch("REF", "out", H_OUT * 20.0, "T_o")
    c.flows.append({"node": air, "source_name": "P"})
    c.zones.append({"id": "room", "air_node": air, "floor_area": 10.0, "volume": 25.0})
    return c


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent)
    for name, build in (("bungalow", bungalow), ("house", house), ("ladder5", ladder5)):
        build().dump(out / f"{name}.json")
