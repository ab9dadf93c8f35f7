def make_counter(start):
    count = start

    def step(delta):
        nonlocal count
        count = count + delta
        return count

    return step


counter = make_counter(10)
counter(1)
counter(5)
print(counter(0))
