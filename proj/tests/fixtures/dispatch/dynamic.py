import sys

if sys.argv[1] == "class1":
    class X:
        def __init__(self):
            self.kind = "class1"
elif sys.argv[1] == "class2":
    class X:
        def __new__(cls):
            return 0
elif sys.argv[1] == "def1":
    def X():
        return 1
elif sys.argv[1] == "def2":
    X = lambda: 2
elif sys.argv[1] == "import":
    import X
else:
    class X:
        def __init__(self, y):
            self.y = y

        def i(self):
            return self.y

        @staticmethod
        def s():
            return 5

    if sys.argv[2] == "static":
        X = X.s
    else:
        X = X(4).i

print(X())
