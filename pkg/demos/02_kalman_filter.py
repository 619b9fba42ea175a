# Track a damped oscillator from noisy position readings.
import numpy as np

from kalmanrl import LinearSystem, kalman_init, kalman_step, sample_gaussian

th = 0.3
F = 0.98 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
sys_ = LinearSystem(F=F, G=np.array([[0.0], [1.0]]), H=np.array([[1.0, 0.0]]),
                    W=0.01 * np.eye(2), E=np.array([[0.25]]),
                    x1_mean=np.zeros(2), Sigma1=np.eye(2))

rng = np.random.default_rng(1)
x = sample_gaussian(rng, sys_.x1_mean, sys_.Sigma1)
fs = kalman_init(sys_)
sq = []
for t in range(200):
    u = np.array([0.1 * np.sin(0.05 * t)])
    y = sys_.H @ x + sample_gaussian(rng, np.zeros(1), sys_.E)
    fs = kalman_step(fs, u, y, sys_)
    x = sys_.F @ x + sys_.G @ u + sample_gaussian(rng, np.zeros(2), sys_.W)
    sq.append((x - fs.xhat) ** 2)

print("steady Sigma diagonal  ", np.diag(fs.Sigma))
print("mean squared error, t>50", np.mean(sq[50:], axis=0))
