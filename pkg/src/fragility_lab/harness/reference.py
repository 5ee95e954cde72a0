"""Values reported for the synthetic experiments, kept apart from computed output.

Keys name the table or figure they come from. Nothing in the harness reads
these while computing; they are only written next to fresh numbers.
"""

TABLE1 = {
    "d": 12,
    "cos_theta1": [-0.1970, -0.1907, -0.6017, -0.2119, -0.2449, -0.5054, -0.7794, -0.5868, -0.1655, -0.4739],
    "cos_theta2": [-0.9992, -0.9992, -0.9984, -0.9994, -0.9955, -0.9988, -0.0795, -0.9972, -0.9993, -0.9942],
    "phi": [0.1812, 0.1870, 0.5888, 0.2048, 0.2032, 0.4985, 0.0738, 0.5895, 0.1480, 0.4497],
}

TABLE2 = {
    "d": 12,
    "runs": 50,
    "valid_runs": 20,
    "filtered_runs": 18,
    "avg_abs_cos_theta1": 0.3645,
    "avg_phi": 0.3280,
    "avg_abs_gap": 0.0367,
}

FIG2_D_LIST = [7, 8, 9, 10, 12, 14, 15, 16, 17]

TABLE3 = {
    "d": 12,
    "alpha": [0.0, 0.111, 0.222, 0.333, 0.444, 0.556, 0.667, 0.778, 0.889, 1.0],
    "mean": [0.3278, 0.3275, 0.3273, 0.3270, 0.3272, 0.3275, 0.3274, 0.3281, 0.3280, 0.3276],
    "median": [0.3270, 0.3261, 0.3258, 0.3255, 0.3303, 0.3307, 0.3293, 0.3322, 0.3315, 0.3324],
}

TABLE4 = {
    "d": 17,
    "rows": {
        "b1": {"cos_theta_t": -0.15324514, "delta": 0.8023384809494019, "m": 5.1928935050964355, "delta_over_m": 0.15450701},
        "b2": {"cos_theta_t": -0.14983976, "delta": 0.7597464323043823, "m": 5.1928935050964355, "delta_over_m": 0.14630501},
    },
}
