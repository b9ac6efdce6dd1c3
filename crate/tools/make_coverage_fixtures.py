#!/usr/bin/env python3
"""Generate the bundled synthetic coverage fixtures.

Three datasets are written under fixtures/coverage/:

  four_probe/  -- the tiny hand-checkable world used in docs and tests
                  (weights 3/3/1/1; coverage of {AS65002} is exactly 0.75)
  google/      -- 250 probes, weight 4 each (total 1000):
                  74.0% of weight traverses zero IXPs,
                  top-32 of the bundled external ranking covers 31.6%
  nordunet/    -- 200 probes (total weight 1000):
                  58.5% of weight traverses exactly one IXP,
                  top-32 of the bundled external ranking covers 58.1%

Each dataset is a traceroutes.jsonl (simplified schema), a rib.csv, an
ixp.csv, and for the larger two an external ranking csv.
"""

import json
import os

ROOT = os.path.join(os.path.dirname(__file__), "..", "fixtures", "coverage")


def write(path, text):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def record(probe_id, probe_asn, target, hops, day=0):
    return json.dumps(
        {
            "probe_id": probe_id,
            "probe_asn": probe_asn,
            "target": target,
            "day": day,
            "hops": hops,
        },
        separators=(",", ":"),
    )


def four_probe():
    rib = [
        ("10.1.0.0/24", 65001),  # A
        ("10.2.0.0/24", 65002),  # B
        ("10.3.0.0/24", 65003),  # C
        ("10.4.0.0/24", 65004),  # D
        ("172.16.1.0/31", 64501),
        ("172.16.1.2/32", 64501),
        ("172.16.2.0/31", 64502),
        ("172.16.2.2/32", 64502),
        ("172.16.3.0/32", 64503),
        ("172.16.4.0/32", 64504),
        ("192.0.9.0/24", 65099),  # target
    ]
    rows = [
        record(1, 64501, "lab", ["172.16.1.1", "10.1.0.1", "10.2.0.1", "192.0.9.1"]),
        record(2, 64502, "lab", ["10.2.0.2", "192.0.9.1"]),
        record(3, 64503, "lab", ["10.3.0.1", "192.0.9.1"]),
        record(4, 64504, "lab", ["10.4.0.1", "192.0.9.1"]),
    ]
    base = os.path.join(ROOT, "four_probe")
    write(os.path.join(base, "traceroutes.jsonl"), "\n".join(rows) + "\n")
    write(
        os.path.join(base, "rib.csv"),
        "prefix,asn\n" + "\n".join(f"{p},{a}" for p, a in rib) + "\n",
    )
    write(os.path.join(base, "ixp.csv"), "prefix,ixp_id,name\n")


def big_fixture(name, target, target_asn, probes, ranking_base):
    """probes: list of (probe_id, probe_asn, weight, one_ixp, ranked_idx)."""
    rib = []
    rows = []
    ixps = []
    transit_count = 50
    for t in range(transit_count):
        rib.append((f"10.80.{t}.0/24", 80000 + t))
    for j in range(32):
        rib.append((f"10.90.{j}.0/24", ranking_base + j))
    for k in range(10):
        ixps.append((f"10.99.{k}.0/24", 500 + k, f"ix{k}"))
    rib.append((f"10.70.{1 if target == 'google' else 2}.0/24", target_asn))

    next_addr = 0x64400000  # 100.64.0.0, carved into per-probe blocks
    for probe_id, asn, weight, one_ixp, ranked_idx in probes:
        # Express the weight as aligned CIDR blocks.
        remaining = weight
        while remaining:
            size = 1
            while size * 2 <= remaining and next_addr % (size * 2) == 0:
                size *= 2
            length = 32 - size.bit_length() + 1
            a = next_addr
            rib.append(
                (f"{a >> 24 & 255}.{a >> 16 & 255}.{a >> 8 & 255}.{a & 255}/{length}", asn)
            )
            next_addr += size
            remaining -= size
        # Round each probe up to an aligned /28 block boundary.
        next_addr = (next_addr + 15) // 16 * 16

        hops = [f"10.80.{probe_id % transit_count}.1"]
        if one_ixp:
            hops.append(f"10.99.{probe_id % 10}.1")
        if ranked_idx is not None:
            hops.append(f"10.90.{ranked_idx}.1")
        hops.append(f"10.70.{1 if target == 'google' else 2}.1")
        rows.append(record(probe_id, asn, target, hops))

    base = os.path.join(ROOT, name)
    write(os.path.join(base, "traceroutes.jsonl"), "\n".join(rows) + "\n")
    write(
        os.path.join(base, "rib.csv"),
        "prefix,asn\n" + "\n".join(f"{p},{a}" for p, a in rib) + "\n",
    )
    write(
        os.path.join(base, "ixp.csv"),
        "prefix,ixp_id,name\n" + "\n".join(f"{p},{i},{n}" for p, i, n in ixps) + "\n",
    )
    write(
        os.path.join(base, "ranking.csv"),
        "vantage\n" + "\n".join(f"AS{ranking_base + j}" for j in range(32)) + "\n",
    )


def google():
    # 250 probes x weight 4 = 1000.
    # Zero-IXP weight 740 (185 probes); ranked coverage 316 (79 probes).
    probes = []
    for i in range(250):
        one_ixp = i >= 185
        ranked = (i % 32) if i < 79 else None
        probes.append((1000 + i, 4_200_000_000 + i, 4, one_ixp, ranked))
    big_fixture("google", "google", 70001, probes, 90001)


def nordunet():
    # 200 probes: 198 x 5 + one 6 + one 4 = 1000.
    # Single-IXP weight 585 (117 five-weight probes);
    # ranked coverage 581 (115 five-weight probes + the six-weight probe).
    probes = []
    for i in range(200):
        weight = 5
        if i == 198:
            weight = 6
        if i == 199:
            weight = 4
        one_ixp = i < 117
        ranked = (i % 32) if (i < 115 or i == 198) else None
        probes.append((2000 + i, 4_210_000_000 + i, weight, one_ixp, ranked))
    big_fixture("nordunet", "nordunet", 70002, probes, 91001)


if __name__ == "__main__":
    four_probe()
    google()
    nordunet()
    print("fixtures written under", os.path.normpath(ROOT))
