from flask import Flask, jsonify, request

app = Flask(__name__)
items = {}


@app.route("/items", methods=["GET"])
def list_items():
    return jsonify(items)


@app.route("/items", methods=["POST"])
def add_item():
    payload = request.get_json()
    items[payload["id"]] = payload
    return jsonify(payload), 201


if __name__ == "__main__":
    app.run(debug=True)
