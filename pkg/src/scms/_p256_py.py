"""Pure-Python P-256 scalar multiplication.

Jacobian coordinates with a 4-bit window for arbitrary points and a
precomputed 64x16 table for the base point. Not constant time.
"""

P = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
N = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5

_INF = (1, 1, 0)


def _double(pt):
    x1, y1, z1 = pt
    if not z1 or not y1:
        return _INF
    delta = z1 * z1 % P
    gamma = y1 * y1 % P
    beta = x1 * gamma % P
    alpha = 3 * (x1 - delta) * (x1 + delta) % P
    x3 = (alpha * alpha - 8 * beta) % P
    z3 = ((y1 + z1) ** 2 - gamma - delta) % P
    y3 = (alpha * (4 * beta - x3) - 8 * gamma * gamma) % P
    return x3, y3, z3


def _add(p1, p2):
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    if not z1:
        return p2
    if not z2:
        return p1
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    if u1 == u2:
        return _double(p1) if s1 == s2 else _INF
    h = (u2 - u1) % P
    i = 4 * h * h % P
    j = h * i % P
    r = 2 * (s2 - s1) % P
    v = u1 * i % P
    x3 = (r * r - j - 2 * v) % P
    y3 = (r * (v - x3) - 2 * s1 * j) % P
    z3 = ((z1 + z2) ** 2 - z1z1 - z2z2) * h % P
    return x3, y3, z3


def _add_affine(p1, x2, y2):
    # mixed addition, second operand has Z == 1
    x1, y1, z1 = p1
    if not z1:
        return x2, y2, 1
    z1z1 = z1 * z1 % P
    u2 = x2 * z1z1 % P
    s2 = y2 * z1 * z1z1 % P
    if x1 == u2:
        return _double(p1) if y1 == s2 else _INF
    h = (u2 - x1) % P
    hh = h * h % P
    i = 4 * hh % P
    j = h * i % P
    r = 2 * (s2 - y1) % P
    v = x1 * i % P
    x3 = (r * r - j - 2 * v) % P
    y3 = (r * (v - x3) - 2 * y1 * j) % P
    z3 = ((z1 + h) ** 2 - z1z1 - hh) % P
    return x3, y3, z3


def _to_affine(pt):
    x, y, z = pt
    if not z:
        return None
    zinv = pow(z, -1, P)
    zinv2 = zinv * zinv % P
    return x * zinv2 % P, y * zinv2 * zinv % P


def mul(k, x, y):
    """Return k*(x, y) as an affine tuple, or None for the identity."""
    k %= N
    if not k:
        return None
    table = [_INF, (x, y, 1)]
    for _ in range(14):
        table.append(_add_affine(table[-1], x, y))
    acc = _INF
    for shift in range(252, -4, -4):
        acc = _double(_double(_double(_double(acc))))
        nib = (k >> shift) & 0xF
        if nib:
            acc = _add(acc, table[nib])
    return _to_affine(acc)


_base_table = None


def _build_base_table():
    # row i holds d * 16^i * G for d in 0..15, affine; None at d == 0
    rows = []
    bx, by = GX, GY
    for _ in range(64):
        row = [None, (bx, by)]
        acc = (bx, by, 1)
        for _ in range(14):
            acc = _add_affine(acc, bx, by)
            row.append(_to_affine(acc))
        rows.append(row)
        nxt = _to_affine(_add_affine(acc, bx, by))  # 16 * base
        bx, by = nxt
    return rows


def mul_base(k):
    global _base_table
    if _base_table is None:
        _base_table = _build_base_table()
    k %= N
    if not k:
        return None
    acc = _INF
    for i, row in enumerate(_base_table):
        nib = (k >> (4 * i)) & 0xF
        if nib:
            ax, ay = row[nib]
            acc = _add_affine(acc, ax, ay)
    return _to_affine(acc)
