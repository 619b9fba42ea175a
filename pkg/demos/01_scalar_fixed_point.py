# The scalar stopping problem F = G = Q = R = 1, Qf = 0, p = 0.5.
# Its value matrix solves Pi = 0.5 * (1 + Pi - Pi^2 / (1 + Pi)), i.e. Pi^2 = 0.5.
import numpy as np

from kalmanrl import CostModel, LinearSystem, greedy_gain, riccati_backward, stationary_pi

one, zero = np.eye(1), np.zeros((1, 1))
sys_ = LinearSystem(F=one, G=one, H=one, W=zero, E=zero, x1_mean=np.zeros(1), Sigma1=one)
cost = CostModel(Q=one, R=one, Qf=zero, p=0.5)

sv = stationary_pi(sys_, cost)
print("Pi*       ", sv.Pi[0, 0], "after", sv.iterations, "iterations")
print("sqrt(0.5) ", np.sqrt(0.5))
print("gain L    ", greedy_gain(sv.Pi, sys_, cost)[0, 0])

# without stopping, the finite-horizon recursion heads to the undiscounted
# fixed point (1 + sqrt 5) / 2 instead
rs = riccati_backward(sys_, cost, 40)
print("S_1 (N=40)", rs.S[0][0, 0], "vs golden ratio", (1 + np.sqrt(5)) / 2)
