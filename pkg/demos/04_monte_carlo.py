# Monte-Carlo check of the stationary value under process noise.
import numpy as np

from kalmanrl import (CostModel, LinearPolicy, LinearSystem, evaluate_policy, greedy_gain,
                      stationary_pi, zero_policy)

F = np.array([[0.9, 0.4], [0.0, 0.7]])
x1 = np.array([1.0, -1.0])
sys_ = LinearSystem(F=F, G=np.array([[0.0], [1.0]]), H=np.eye(2), W=0.05 * np.eye(2),
                    E=np.zeros((2, 2)), x1_mean=x1, Sigma1=np.eye(2))
cost = CostModel(Q=np.eye(2), R=np.array([[0.5]]), Qf=2 * np.eye(2), p=0.2)

sv = stationary_pi(sys_, cost)
fixed = np.zeros((2, 2))
mean, se = evaluate_policy(sys_, cost, LinearPolicy(greedy_gain(sv.Pi, sys_, cost)),
                           episodes=200_000, seed=3, restart_cov=fixed)
print(f"predicted  {x1 @ sv.Pi @ x1 + sv.bias:.4f}")
print(f"simulated  {mean:.4f} +- {se:.4f}")

mean0, se0 = evaluate_policy(sys_, cost, zero_policy(1), episodes=200_000, seed=3,
                             restart_cov=fixed)
print(f"no control {mean0:.4f} +- {se0:.4f}")
