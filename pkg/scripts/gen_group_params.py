#!/usr/bin/env python3
"""Regenerate the hardcoded group constants in src/dcp/he.py.

Derivation is nothing-up-my-sleeve: primes are searched upward from SHA-256
outputs of fixed labels, and generators are hash-derived field elements raised
to the cofactor, so nobody can know the discrete log of h to base g.

Needs gmpy2 (fast primality); it is a script-only dependency.
"""

import hashlib

import gmpy2


def nums_int(label: bytes, counter: int, nbytes: int) -> int:
    out = b""
    i = 0
    while len(out) < nbytes:
        out += hashlib.sha256(
            label + counter.to_bytes(4, "big") + i.to_bytes(4, "big")
        ).digest()
        i += 1
    return int.from_bytes(out[:nbytes], "big")


def gen_test_profile():
    """64-bit safe prime p = 2q + 1; generators are hash-derived squares."""
    seed = nums_int(b"dcp/v1/test/p", 0, 8) | (1 << 63) | 1
    q = gmpy2.mpz(seed >> 1)
    while True:
        q = gmpy2.next_prime(q)
        p = 2 * q + 1
        if gmpy2.is_prime(p, 50):
            break
    p, q = int(p), int(q)

    def square_gen(label):
        c = 0
        while True:
            u = nums_int(label, c, 8) % p
            g = pow(u, 2, p)
            if g not in (0, 1, p - 1):
                return g
            c += 1

    return p, q, square_gen(b"dcp/v1/test/g"), square_gen(b"dcp/v1/test/h")


def gen_secure_profile():
    """2048-bit p with a 256-bit prime-order subgroup; cofactor generators."""
    q = gmpy2.next_prime(gmpy2.mpz(nums_int(b"dcp/v1/secure/q", 0, 32) | (1 << 255) | 1))
    counter = 0
    while True:
        m = gmpy2.mpz(nums_int(b"dcp/v1/secure/m", counter, 224) | (1 << 1791))
        m -= m % 2
        p = q * m + 1
        if p.bit_length() == 2048 and gmpy2.is_prime(p, 50):
            break
        counter += 1
    p, q = int(p), int(q)
    cofactor = (p - 1) // q

    def cof_gen(label):
        c = 0
        while True:
            u = nums_int(label, c, 256) % p
            g = pow(u, cofactor, p)
            if g != 1:
                return g
            c += 1

    return p, q, cof_gen(b"dcp/v1/secure/g"), cof_gen(b"dcp/v1/secure/h")


def main():
    pt, qt, gt, ht = gen_test_profile()
    print(f"_P_TEST = {hex(pt).upper().replace('0X', '0x')}")
    print(f"_Q_TEST = {hex(qt).upper().replace('0X', '0x')}")
    print(f"_G_TEST = {hex(gt).upper().replace('0X', '0x')}")
    print(f"_H_TEST = {hex(ht).upper().replace('0X', '0x')}")
    ps, qs, gs, hs = gen_secure_profile()
    for name, val in (("_P_SECURE", ps), ("_G_SECURE", gs), ("_H_SECURE", hs)):
        print(f"{name} = {hex(val)}")
    print(f"_Q_SECURE = {hex(qs)}")
    for name, val, bits in (("p", ps, 2048), ("q", qs, 256)):
        assert val.bit_length() == bits, name
    assert pow(gs, qs, ps) == 1 and pow(hs, qs, ps) == 1


if __name__ == "__main__":
    main()
