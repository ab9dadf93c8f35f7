import sys
from collections import Counter


def tokenize(line):
    return line.lower().split()


def count_words(path):
    counts = Counter()
    with open(path) as f:
        for line in f:
            counts.update(tokenize(line))
    return counts


counts = count_words(sys.argv[1])
for word, n in counts.most_common(10):
    print(word, n)
