from sklearn.linear_model import LogisticRegression

clf = LogisticRegression()
clf.fit([[0], [1]], [0, 1])
