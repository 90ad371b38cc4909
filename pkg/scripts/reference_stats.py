"""Recompute reference chi-squared tests and Akaike weights from their inputs."""

from turntaker.stats import akaike_weights, chi_squared_yates, evidence_ratio

TABLES = {
    "speaking proportion": [[24, 0], [17, 7]],
    "ABA format": [[21, 3], [7, 17]],
    "dyadic exchange": [[26, 4], [11, 19]],
}
PI_DELTAS = [0, 7.2, 8.2, 9.3, 9.6, 9.7]


def main():
    print("coverage, full vs reduced (Yates-corrected chi-squared)")
    for name, table in TABLES.items():
        stat, p = chi_squared_yates(table)
        print(f"  {name:<20} {table}  chi2={stat:6.2f}  p={p:.2g}")
    w = akaike_weights(PI_DELTAS)
    print("\nAkaike weights for pi deltas", PI_DELTAS)
    print("  " + "  ".join(f"{x:.3f}" for x in w))
    print(f"  evidence ratio best/second (rounded weights): {evidence_ratio(0.94, 0.025):.1f}")
    print(f"  evidence ratio best/second (exact weights):   {evidence_ratio(w[0], w[1]):.1f}")


if __name__ == "__main__":
    main()
