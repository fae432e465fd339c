"""Independent reference computations used to check the library.

Nothing here calls into the code under test except to read plain data
(device records, element lists); every formula is re-derived locally.
"""

from __future__ import annotations

import math

import numpy as np

Z0 = 50.0


# -- modified nodal analysis ------------------------------------------------


def mna(elements, omega, injections, extra_shunts=()):
    """Node voltages of a linear netlist at one angular frequency.

    elements: tuples as produced by Chain.netlist() (R, C, L, K, G).
    injections: {node: current injected} ; extra_shunts: [(node, admittance)].
    Inductors (including zero-valued ones used as wires) get branch currents.
    """
    nodes = sorted({n for e in elements if e[0] in "RCLG" for n in e[2:4 if e[0] != "G" else 6]} - {"0"})
    for n in injections:
        if n != "0" and n not in nodes:
            nodes.append(n)
    idx = {n: i for i, n in enumerate(nodes)}
    inductors = [e for e in elements if e[0] == "L"]
    lidx = {e[1]: len(nodes) + i for i, e in enumerate(inductors)}
    size = len(nodes) + len(inductors)
    a = np.zeros((size, size), dtype=complex)
    b = np.zeros(size, dtype=complex)
    s = 1j * omega

    def stamp_y(n1, n2, y):
        i, j = idx.get(n1), idx.get(n2)
        if i is not None:
            a[i, i] += y
        if j is not None:
            a[j, j] += y
        if i is not None and j is not None:
            a[i, j] -= y
            a[j, i] -= y

    values = {}
    for e in elements:
        kind = e[0]
        if kind == "R":
            stamp_y(e[2], e[3], 1.0 / e[4])
        elif kind == "C":
            stamp_y(e[2], e[3], s * e[4])
        elif kind == "L":
            k = lidx[e[1]]
            i, j = idx.get(e[2]), idx.get(e[3])
            # branch current leaves n1 and enters n2
            if i is not None:
                a[i, k] += 1.0
                a[k, i] += 1.0
            if j is not None:
                a[j, k] -= 1.0
                a[k, j] -= 1.0
            a[k, k] -= s * e[4]
            values[e[1]] = e[4]
        elif kind == "G":
            _, _, op, om, cp, cm, gm = e
            # current gm * (v_cp - v_cm) leaves op and enters om, as a drain current
            for node, sign in ((op, 1.0), (om, -1.0)):
                r = idx.get(node)
                if r is None:
                    continue
                if cp in idx:
                    a[r, idx[cp]] += sign * gm
                if cm in idx:
                    a[r, idx[cm]] -= sign * gm
    for e in elements:
        if e[0] == "K":
            _, _, l1, l2, k = e
            m = k * math.sqrt(values[l1] * values[l2])
            a[lidx[l1], lidx[l2]] -= s * m
            a[lidx[l2], lidx[l1]] -= s * m
    for node, y in extra_shunts:
        a[idx[node], idx[node]] += y
    for node, cur in injections.items():
        b[idx[node]] += cur
    x = np.linalg.solve(a, b)
    return {n: x[i] for n, i in idx.items()}


def chain_oracle(chain, freqs_ghz):
    """(gain_db, s11_db, s22_db) from nodal analysis of the flattened chain."""
    from rfamp.evaluator import ShuntRC

    els = chain.netlist()
    has_load = isinstance(chain.blocks[-1], ShuntRC)
    core = chain.blocks[:-1] if has_load else chain.blocks
    # output node of the core (where the load attaches)
    out_core = "out" if not has_load else (f"n{len(chain.blocks) - 1}" if len(chain.blocks) > 1 else "in")
    core_els = []
    for i, blk in enumerate(core):
        a = "in" if i == 0 else f"n{i}"
        b = f"n{i + 1}" if i + 1 < len(chain.blocks) else "out"
        core_els.extend(blk.elements(a, b, f"b{i}"))
    gains, s11, s22 = [], [], []
    for f in np.atleast_1d(freqs_ghz):
        w = 2 * math.pi * f * 1e9
        v = mna(els, w, {"in": 1.0 / Z0}, [("in", 1.0 / Z0)])  # 1 V EMF behind 50 ohm
        vin = v["in"]
        iin = (1.0 - vin) / Z0
        zin = vin / iin
        gains.append(2.0 * v["out"])
        s11.append((zin - Z0) / (zin + Z0))
        if core:
            vo = mna(core_els, w, {out_core: 1.0}, [("in", 1.0 / Z0)])
            zout = vo[out_core]
        else:
            zout = Z0
        s22.append((zout - Z0) / (zout + Z0))

    def db(x):
        return 20 * np.log10(np.maximum(np.abs(np.asarray(x)), 1e-5))

    return db(gains), db(s11), db(s22), np.asarray(gains), np.asarray(s11)


# -- coupled resonator ------------------------------------------------------


def mcr_tank(k, w0, q, rs):
    """Element values of the symmetric two-tank circuit with tank resistance rs."""
    c = q / (w0 * rs)
    l = 1.0 / (w0 * w0 * c)
    return c, l


def mcr_two_port(k, w0, q, rs, r2, omega):
    """(y11, z21, z12) of the symmetric coupled tanks by 2-node nodal analysis.

    The secondary is the primary's mirror scaled by an ideal r2/rs impedance
    ratio, which multiplies z21 by sqrt(r2/rs).
    """
    c, l = mcr_tank(k, w0, q, rs)
    s = 1j * omega
    m = k * l
    det = l * l - m * m
    y = np.array([[1 / rs + s * c + l / (s * det), -m / (s * det)],
                  [-m / (s * det), 1 / rs + s * c + l / (s * det)]])
    z = np.linalg.inv(y)
    y11_in = 1.0 / z[0, 0]  # secondary loaded by its own tank only
    scale = math.sqrt(r2 / rs)
    return y11_in, z[1, 0] * scale, z[0, 1] * scale


def stage_voltage_oracle(gm_ms, rs_src, cs_ff, k, w0, q, omega):
    """Secondary voltage / 2 of the coupled tanks driven by the stage Norton source.

    The source is characterised into 50 ohm, so its internal current is
    gm (Zs + 50) / Zs; it drives Zs in parallel with the tank input.
    """
    gm = gm_ms * 1e-3
    s = 1j * omega
    zs = rs_src / (1 + s * rs_src * cs_ff * 1e-15)
    i_src = gm * (zs + 50.0) / zs
    c, l = mcr_tank(k, w0, q, rs_src)
    m = k * l
    det = l * l - m * m
    y = np.array([[1 / rs_src + s * c + l / (s * det) + 1 / zs, -m / (s * det)],
                  [-m / (s * det), 1 / rs_src + s * c + l / (s * det)]])
    v = np.linalg.solve(y, np.array([i_src, 0.0]))
    return v[1] / 2.0


# -- device model, noise, compression ----------------------------------------


def device_oracle(kind_kappa, width_um, vbias_mv, vth_mv=280.0):
    vov = (vbias_mv - vth_mv) / 1000.0
    i_d = kind_kappa * width_um * vov ** 2
    gm = 2 * kind_kappa * width_um * vov
    return {"id": i_d, "gm": gm, "cin": 1.1 * width_um, "cs_out": 0.55 * width_um,
            "rs_out": 22000.0 / i_d}


def friis_oracle(factors, gains_db):
    total = factors[0]
    g = 1.0
    for i in range(1, len(factors)):
        g *= 10 ** (gains_db[i - 1] / 10)
        total += (factors[i] - 1) / g
    return total


def cascade_ip1db_oracle(p_dbm, gains_db):
    acc = 0.0
    for i, p in enumerate(p_dbm):
        g = 1.0
        for j in range(i):
            g *= 10 ** (gains_db[j] / 10)
        acc += g / 10 ** (p / 10)
    return 10 * math.log10(1 / acc)


def l_section_realizable(r, x, z0=Z0):
    """Inductor-only L-section (shunt L at source, series L) can match r + jx."""
    return 0 < r <= z0 and x <= -math.sqrt(r * (z0 - r)) + 1e-9


def _port_nodes(chain):
    n = len(chain.blocks)
    return ["in"] + [f"n{i}" for i in range(1, n)] + ["out"]


def stage_oracle(chain, f_ghz):
    """Per-stage quantities at one frequency by nodal analysis.

    Returns (zin, stage power gains, Re(Z_th) behind each stage input).  Stage
    i spans its input node to the next stage's input (the load node for the
    last one); stage 1 is referenced to V_s / 2.
    """
    from rfamp.evaluator import ShuntRC

    w = 2 * math.pi * f_ghz * 1e9
    nodes = _port_nodes(chain)
    v = mna(chain.netlist(), w, {"in": 1.0 / Z0}, [("in", 1.0 / Z0)])
    vin = v["in"]
    zin = vin / ((1.0 - vin) / Z0)
    ends = list(chain.stage_index) + [len(chain.blocks) - (1 if isinstance(chain.blocks[-1], ShuntRC) else 0)]
    gains = []
    for i in range(len(chain.stage_index)):
        start = 0.5 if i == 0 else v[nodes[ends[i]]]
        gains.append(abs(v[nodes[ends[i + 1]]] / start) ** 2)
    z_th = []
    for i, idx in enumerate(chain.stage_index):
        first = 0 if i == 0 else chain.stage_index[i - 1]
        els = []
        for j in range(first, idx):
            els.extend(chain.blocks[j].elements(nodes[j], nodes[j + 1], f"b{j}"))
        shunts = [("in", 1.0 / Z0)] if first == 0 else []
        if not els:
            z_th.append(Z0)
            continue
        z_th.append(mna(els, w, {nodes[idx]: 1.0}, shunts)[nodes[idx]].real)
    return zin, gains, z_th
C_MM = 4.0  # mismatch noise constant, restated independently
