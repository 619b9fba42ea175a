# Learn the value matrix on-line and compare with the planner.
#
# With the plain step-size schedule a single large restart state can push
# Pi negative, after which no greedy action exists. max_step bounds the
# change one update can make at x and keeps the run stable.
import numpy as np

from kalmanrl import CostModel, LearningSchedule, LinearSystem, learn, stationary_pi
from kalmanrl.errors import NumericalError

one, zero = np.eye(1), np.zeros((1, 1))
sys_ = LinearSystem(F=one, G=one, H=one, W=zero, E=zero, x1_mean=np.zeros(1), Sigma1=one)
cost = CostModel(Q=one, R=one, Qf=zero, p=0.5)
pi_star = stationary_pi(sys_, cost).Pi

plain = LearningSchedule(restart_cov=one)
try:
    learn(sys_, cost, plain, episodes=2000, seed=0)
except NumericalError as exc:
    print("plain schedule:", exc)

capped = LearningSchedule(restart_cov=one, max_step=0.1)
res = learn(sys_, cost, capped, episodes=20_000, seed=0, oracle=pi_star)
print("capped schedule: Pi =", res.value.Pi[0, 0], " Pi* =", pi_star[0, 0])
for rec in res.curve[::4000]:
    print(f"  episode {rec.episode:6d}  |Pi - Pi*| = {rec.pi_error:.4f}")
