"""Characterise the timing channel with the unique-address microbenchmark.

One warp issues 32 cold loads over n distinct line-aligned addresses,
n = 1..32, for each coalescing-unit configuration.  Regressing time on n
gives the slope and SNR table that quantifies how leaky each width policy
is: narrow widths leak the most, randomised widths bury the line in noise.

Run:  python demos/run_microbench.py
"""

from coalsim import campaign as cp

REPS = 2_000

print(f"sweeping n = 1..32, {REPS} repetitions per cell ...\n")
rows, _ = cp.microbench_table(reps=REPS, seed=7)

print(f"{'policy':>16} {'beta1':>9} {'beta0':>8} {'sigma_eps^2':>12} {'SNR':>9}")
for label in ("8", "16", "32", "64", "fixed_random", "dynamic_random"):
    est = rows[label]
    print(
        f"{label:>16} {est.fit.beta1:9.3f} {est.fit.beta0:8.1f} "
        f"{est.fit.sigma_eps_sq:12.1f} {est.snr:9.4f}"
    )

print(
    "\nreading the table: the slope shrinks as the fixed width grows, and the"
    "\nrandomised policies trade a little mean slope for a lot of residual"
    "\nnoise, which is exactly what pushes their SNR below every fixed width."
)
