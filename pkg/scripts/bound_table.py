"""Print the two deviation bounds side by side and the sample sizes each one needs."""
import argparse

from acceptability.vcbound import BASIC, DEVROYE, bound_comparison, minimal_sample_size


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vc-dim", type=int, default=4)
    ap.add_argument("--delta", type=float, default=0.05)
    args = ap.parse_args()

    print(f"{'n':>10} {'eps':>7} {'devroye':>12} {'basic':>12}")
    for row in bound_comparison([0.01, 0.05, 0.1], [10**4, 10**5, 10**6, 10**7], args.vc_dim):
        print(f"{row['n']:>10} {row['epsilon']:>7} {row['devroye']:>12.4g} {row['basic']:>12.4g}")
    print(f"\nminimal n at delta={args.delta}, V={args.vc_dim}")
    print(f"{'eps':>8} {'devroye':>12} {'basic':>14}")
    for eps in (0.5 / 76.34, 0.5 / 3.80, 0.01, 0.05, 0.1):
        a = minimal_sample_size(eps, args.delta, args.vc_dim, DEVROYE)
        b = minimal_sample_size(eps, args.delta, args.vc_dim, BASIC)
        print(f"{eps:>8.4g} {a:>12} {b:>14}")


if __name__ == "__main__":
    main()
