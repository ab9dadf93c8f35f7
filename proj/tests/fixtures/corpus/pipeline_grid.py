from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC
from sklearn.model_selection import GridSearchCV
from sklearn.datasets import load_digits

digits = load_digits()
pipe = Pipeline([("scale", StandardScaler()), ("svc", SVC())])
grid = GridSearchCV(pipe, {"svc__C": [0.1, 1, 10]}, cv=3)
grid.fit(digits.data, digits.target)
best = grid.best_estimator_
print(grid.best_params_, best.score(digits.data, digits.target))
