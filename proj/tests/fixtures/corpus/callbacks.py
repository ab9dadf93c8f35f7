import threading


def worker(queue, results):
    while not queue.empty():
        item = queue.get()
        results.append(item * 2)


def on_done(results):
    print(sum(results))


results = []
t = threading.Thread(target=worker, args=(None, results))
t.start()
t.join()
on_done(results)
