#!/usr/bin/env python3
"""Writes the bundled Sun + 9 planet initial conditions.

Positions and velocities are computed from the J2000 mean Keplerian elements
of Standish, "Keplerian Elements for Approximate Positions of the Major
Planets" (JPL Solar System Dynamics, table 1, valid 1800-2050), as two-body
osculating states about the Sun with k = G (m_sun + m_planet). Earth stands
for the Earth-Moon barycentre. Frame: J2000 ecliptic, heliocentric; the
loader moves everything to the barycentre.
"""

import json
import sys

import mpmath as mp

mp.mp.dps = 40

# Gaussian gravitational constant squared, AU^3 / (M_sun day^2).
G = mp.mpf("0.01720209895") ** 2

# name, a [AU], e, I, L, long. perihelion, long. ascending node [deg],
# sun/planet mass ratio (IAU 2009 system; Earth entry is Earth + Moon).
ELEMENTS = [
    ("Mercury", "0.38709927", "0.20563593", "7.00497902", "252.25032350", "77.45779628", "48.33076593", "6023600"),
    ("Venus", "0.72333566", "0.00677672", "3.39467605", "181.97909950", "131.60246718", "76.67984255", "408523.71"),
    ("Earth", "1.00000261", "0.01671123", "-0.00001531", "100.46457166", "102.93768193", "0.0", "328900.56"),
    ("Mars", "1.52371034", "0.09339410", "1.84969142", "-4.55343205", "-23.94362959", "49.55953891", "3098708"),
    ("Jupiter", "5.20288700", "0.04838624", "1.30439695", "34.39644051", "14.72847983", "100.47390909", "1047.3486"),
    ("Saturn", "9.53667594", "0.05386179", "2.48599187", "49.95424423", "92.59887831", "113.66242448", "3497.898"),
    ("Uranus", "19.18916464", "0.04725744", "0.77263783", "313.23810451", "170.95427630", "74.01692503", "22902.98"),
    ("Neptune", "30.06992276", "0.00859048", "1.77004347", "-55.12002969", "44.96476227", "131.78422574", "19412.24"),
    ("Pluto", "39.48211675", "0.24882730", "17.14001206", "238.92903833", "224.06891629", "110.30393684", "1.35e8"),
]


def state(a, e, inc, mean_long, long_peri, node, k):
    deg = mp.pi / 180
    omega = (long_peri - node) * deg
    M = mp.fmod((mean_long - long_peri) * deg, 2 * mp.pi)
    E = mp.findroot(lambda x: x - e * mp.sin(x) - M, M)
    n = mp.sqrt(k / a**3)
    x = a * (mp.cos(E) - e)
    y = a * mp.sqrt(1 - e * e) * mp.sin(E)
    edot = n / (1 - e * mp.cos(E))
    vx = -a * mp.sin(E) * edot
    vy = a * mp.sqrt(1 - e * e) * mp.cos(E) * edot
    cw, sw = mp.cos(omega), mp.sin(omega)
    cO, sO = mp.cos(node * deg), mp.sin(node * deg)
    ci, si = mp.cos(inc * deg), mp.sin(inc * deg)
    rot = [
        [cw * cO - sw * sO * ci, -sw * cO - cw * sO * ci],
        [cw * sO + sw * cO * ci, -sw * sO + cw * cO * ci],
        [sw * si, cw * si],
    ]
    pos = [r[0] * x + r[1] * y for r in rot]
    vel = [r[0] * vx + r[1] * vy for r in rot]
    return pos, vel


def main(path):
    bodies = [{"name": "Sun", "mass": 1.0, "position": [0.0, 0.0, 0.0], "velocity": [0.0, 0.0, 0.0]}]
    for name, *els, ratio in ELEMENTS:
        a, e, inc, L, lp, node = (mp.mpf(x) for x in els)
        m = 1 / mp.mpf(ratio)
        pos, vel = state(a, e, inc, L, lp, node, G * (1 + m))
        bodies.append({
            "name": name,
            "mass": float(m),
            "position": [float(x) for x in pos],
            "velocity": [float(x) for x in vel],
        })
    doc = {
        "description": "Sun and nine planets (Earth = Earth-Moon barycentre)",
        "epoch": "J2000.0 (JD 2451545.0 TDB)",
        "frame": "heliocentric, J2000 ecliptic",
        "provenance": "two-body osculating states from Standish J2000 mean elements; "
                      "generated by tools/make_solar_system_ic.py",
        "units": {"length": "au", "time": "day", "mass": "solar"},
        "G": float(G),
        "bodies": bodies,
    }
    with open(path, "w") as out:
        json.dump(doc, out, indent=2)
        out.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/solar_system_j2000.json")
