import os

print "listing", os.getcwd()
