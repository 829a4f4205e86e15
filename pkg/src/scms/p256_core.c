/* P-256 scalar multiplication: 4x64-bit Montgomery field arithmetic,
 * Jacobian coordinates, 4-bit fixed window. Not constant time. */
#include <string.h>
#include "p256_core.h"

typedef unsigned __int128 u128;
typedef uint64_t fe[4]; /* little-endian limbs, Montgomery form */

static const fe P = {0xffffffffffffffffULL, 0x00000000ffffffffULL,
                     0x0000000000000000ULL, 0xffffffff00000001ULL};
/* R^2 mod p, R = 2^256 */
static const fe RR = {0x0000000000000003ULL, 0xfffffffbffffffffULL,
                      0xfffffffffffffffeULL, 0x00000004fffffffdULL};
static const fe ONE_MONT = {0x0000000000000001ULL, 0xffffffff00000000ULL,
                            0xffffffffffffffffULL, 0x00000000fffffffeULL};

static int fe_geq_p(const uint64_t a[4]) {
    for (int i = 3; i >= 0; i--) {
        if (a[i] > P[i]) return 1;
        if (a[i] < P[i]) return 0;
    }
    return 1;
}

static void fe_sub_p(uint64_t a[4]) {
    u128 borrow = 0;
    for (int i = 0; i < 4; i++) {
        u128 d = (u128)a[i] - P[i] - borrow;
        a[i] = (uint64_t)d;
        borrow = (d >> 64) & 1;
    }
}

static void fe_add(fe r, const fe a, const fe b) {
    u128 carry = 0;
    uint64_t t[4];
    for (int i = 0; i < 4; i++) {
        u128 s = (u128)a[i] + b[i] + carry;
        t[i] = (uint64_t)s;
        carry = s >> 64;
    }
    if (carry || fe_geq_p(t)) fe_sub_p(t);
    memcpy(r, t, sizeof(t));
}

static void fe_sub(fe r, const fe a, const fe b) {
    u128 borrow = 0;
    uint64_t t[4];
    for (int i = 0; i < 4; i++) {
        u128 d = (u128)a[i] - b[i] - borrow;
        t[i] = (uint64_t)d;
        borrow = (d >> 64) & 1;
    }
    if (borrow) {
        u128 carry = 0;
        for (int i = 0; i < 4; i++) {
            u128 s = (u128)t[i] + P[i] + carry;
            t[i] = (uint64_t)s;
            carry = s >> 64;
        }
    }
    memcpy(r, t, sizeof(t));
}

/* CIOS Montgomery multiplication; -p^-1 mod 2^64 == 1 for P-256. */
static void fe_mul(fe r, const fe a, const fe b) {
    uint64_t t[6] = {0, 0, 0, 0, 0, 0};
    for (int i = 0; i < 4; i++) {
        u128 carry = 0;
        for (int j = 0; j < 4; j++) {
            u128 uv = (u128)t[j] + (u128)a[j] * b[i] + carry;
            t[j] = (uint64_t)uv;
            carry = uv >> 64;
        }
        u128 uv = (u128)t[4] + carry;
        t[4] = (uint64_t)uv;
        t[5] = (uint64_t)(uv >> 64);

        uint64_t m = t[0];
        uv = (u128)t[0] + (u128)m * P[0];
        carry = uv >> 64;
        for (int j = 1; j < 4; j++) {
            uv = (u128)t[j] + (u128)m * P[j] + carry;
            t[j - 1] = (uint64_t)uv;
            carry = uv >> 64;
        }
        uv = (u128)t[4] + carry;
        t[3] = (uint64_t)uv;
        t[4] = t[5] + (uint64_t)(uv >> 64);
    }
    if (t[4] || fe_geq_p(t)) fe_sub_p(t);
    memcpy(r, t, 4 * sizeof(uint64_t));
}

static void fe_sqr(fe r, const fe a) { fe_mul(r, a, a); }

static int fe_is_zero(const fe a) { return (a[0] | a[1] | a[2] | a[3]) == 0; }

static int fe_eq(const fe a, const fe b) { return memcmp(a, b, sizeof(fe)) == 0; }

/* a^(p-2) */
static void fe_inv(fe r, const fe a) {
    static const uint64_t E[4] = {0xfffffffffffffffdULL, 0x00000000ffffffffULL,
                                  0x0000000000000000ULL, 0xffffffff00000001ULL};
    fe acc;
    memcpy(acc, ONE_MONT, sizeof(fe));
    for (int i = 255; i >= 0; i--) {
        fe_sqr(acc, acc);
        if ((E[i / 64] >> (i % 64)) & 1) fe_mul(acc, acc, a);
    }
    memcpy(r, acc, sizeof(fe));
}

static void fe_from_bytes(fe r, const uint8_t in[32]) {
    fe t;
    for (int i = 0; i < 4; i++) {
        uint64_t w = 0;
        for (int j = 0; j < 8; j++) w = (w << 8) | in[(3 - i) * 8 + j];
        t[i] = w;
    }
    fe_mul(r, t, RR);
}

static void fe_to_bytes(uint8_t out[32], const fe a) {
    static const fe one = {1, 0, 0, 0};
    fe t;
    fe_mul(t, a, one);
    for (int i = 0; i < 4; i++) {
        uint64_t w = t[i];
        for (int j = 7; j >= 0; j--) {
            out[(3 - i) * 8 + j] = (uint8_t)w;
            w >>= 8;
        }
    }
}

typedef struct {
    fe X, Y, Z; /* Z == 0 marks the identity */
} jpoint;

/* dbl-2001-b, a = -3 */
static void pt_double(jpoint *r, const jpoint *p) {
    if (fe_is_zero(p->Z) || fe_is_zero(p->Y)) {
        memset(r, 0, sizeof(*r));
        return;
    }
    fe delta, gamma, beta, alpha, t1, t2, x3, y3, z3;
    fe_sqr(delta, p->Z);
    fe_sqr(gamma, p->Y);
    fe_mul(beta, p->X, gamma);
    fe_sub(t1, p->X, delta);
    fe_add(t2, p->X, delta);
    fe_mul(alpha, t1, t2);
    fe_add(t1, alpha, alpha);
    fe_add(alpha, t1, alpha);
    fe_sqr(x3, alpha);
    fe_add(t1, beta, beta);
    fe_add(t1, t1, t1);
    fe_add(t2, t1, t1);
    fe_sub(x3, x3, t2);
    fe_add(z3, p->Y, p->Z);
    fe_sqr(z3, z3);
    fe_sub(z3, z3, gamma);
    fe_sub(z3, z3, delta);
    fe_sub(t1, t1, x3);
    fe_mul(y3, alpha, t1);
    fe_sqr(t2, gamma);
    fe_add(t2, t2, t2);
    fe_add(t2, t2, t2);
    fe_add(t2, t2, t2);
    fe_sub(y3, y3, t2);
    memcpy(r->X, x3, sizeof(fe));
    memcpy(r->Y, y3, sizeof(fe));
    memcpy(r->Z, z3, sizeof(fe));
}

/* add-2007-bl */
static void pt_add(jpoint *r, const jpoint *p, const jpoint *q) {
    if (fe_is_zero(p->Z)) { *r = *q; return; }
    if (fe_is_zero(q->Z)) { *r = *p; return; }
    fe z1z1, z2z2, u1, u2, s1, s2, h, i, j, rr, v, t;
    fe_sqr(z1z1, p->Z);
    fe_sqr(z2z2, q->Z);
    fe_mul(u1, p->X, z2z2);
    fe_mul(u2, q->X, z1z1);
    fe_mul(s1, p->Y, q->Z);
    fe_mul(s1, s1, z2z2);
    fe_mul(s2, q->Y, p->Z);
    fe_mul(s2, s2, z1z1);
    if (fe_eq(u1, u2)) {
        if (fe_eq(s1, s2)) pt_double(r, p);
        else memset(r, 0, sizeof(*r));
        return;
    }
    jpoint out;
    fe_sub(h, u2, u1);
    fe_add(i, h, h);
    fe_sqr(i, i);
    fe_mul(j, h, i);
    fe_sub(rr, s2, s1);
    fe_add(rr, rr, rr);
    fe_mul(v, u1, i);
    fe_sqr(out.X, rr);
    fe_sub(out.X, out.X, j);
    fe_sub(out.X, out.X, v);
    fe_sub(out.X, out.X, v);
    fe_sub(t, v, out.X);
    fe_mul(out.Y, rr, t);
    fe_mul(t, s1, j);
    fe_add(t, t, t);
    fe_sub(out.Y, out.Y, t);
    fe_add(t, p->Z, q->Z);
    fe_sqr(t, t);
    fe_sub(t, t, z1z1);
    fe_sub(t, t, z2z2);
    fe_mul(out.Z, t, h);
    *r = out;
}

int p256_scalar_mult(const uint8_t k[32], const uint8_t x[32], const uint8_t y[32],
                     uint8_t ox[32], uint8_t oy[32]) {
    jpoint table[16];
    memset(&table[0], 0, sizeof(jpoint));
    fe_from_bytes(table[1].X, x);
    fe_from_bytes(table[1].Y, y);
    memcpy(table[1].Z, ONE_MONT, sizeof(fe));
    for (int d = 2; d < 16; d++) pt_add(&table[d], &table[d - 1], &table[1]);

    jpoint acc;
    memset(&acc, 0, sizeof(acc));
    for (int byte = 0; byte < 32; byte++) {
        for (int half = 0; half < 2; half++) {
            int nib = half == 0 ? (k[byte] >> 4) : (k[byte] & 0x0f);
            for (int s = 0; s < 4; s++) pt_double(&acc, &acc);
            if (nib) pt_add(&acc, &acc, &table[nib]);
        }
    }
    if (fe_is_zero(acc.Z)) return 0;

    fe zinv, zinv2, ax, ay;
    fe_inv(zinv, acc.Z);
    fe_sqr(zinv2, zinv);
    fe_mul(ax, acc.X, zinv2);
    fe_mul(zinv2, zinv2, zinv);
    fe_mul(ay, acc.Y, zinv2);
    fe_to_bytes(ox, ax);
    fe_to_bytes(oy, ay);
    return 1;
}
