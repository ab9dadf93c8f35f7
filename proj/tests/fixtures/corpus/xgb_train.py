import xgboost as xgb
import pandas as pd

train = pd.read_csv("train.csv")
labels = train.pop("label")

dtrain = xgb.DMatrix(train, label=labels)
params = {"max_depth": 4, "eta": 0.1, "objective": "binary:logistic"}
booster = xgb.train(params, dtrain, num_boost_round=50)
booster.save_model("model.bin")
