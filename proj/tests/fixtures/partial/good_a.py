import numpy as np

values = np.arange(10)
print(values.mean())
