WIDTH = 640
HEIGHT = 480
ASPECT = WIDTH / HEIGHT
AREA = WIDTH * HEIGHT
HALF = (WIDTH // 2, HEIGHT // 2)
