"""Grid convergence of the avoiding-path oracle and per-shell deltas.

Prints the empty-shell estimate for shrinking grid steps, then the raw and
certified lengths of the default labyrinth shells.
"""
import time

from discfol.labyrinth import Shell, build_labyrinth, estimate_min_avoiding_length

RHO = [0.1, 0.2, 0.35, 0.6, 0.9]


def main():
    shell = Shell(1, 0.5, 0.9)
    print("h,length,rel_error,seconds")
    for h in (0.04, 0.02, 0.01, 0.005):
        t0 = time.perf_counter()
        L = estimate_min_avoiding_length(shell, [], h)
        print(f"{h},{L:.6f},{abs(L - 0.4) / 0.4:.2e},{time.perf_counter() - t0:.2f}")
    lab = build_labyrinth(RHO, 4)
    print("shell,inner,outer,plates,grid_step,raw,delta,min_gap")
    for s, ps, h, raw, d, m in zip(lab.shells, lab.plates, lab.grid_steps, lab.raw_lengths, lab.deltas, lab.margins):
        print(f"{s.index},{s.inner},{s.outer},{len(ps)},{h:.2e},{raw:.6f},{d:.6f},{m:.3e}")


if __name__ == "__main__":
    main()
