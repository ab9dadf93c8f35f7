class InsufficientFunds(Exception):
    pass


class Account:
    rate = 0.01

    def __init__(self, owner, balance=0):
        self.owner = owner
        self.balance = balance

    def deposit(self, amount):
        self.balance = self.balance + amount
        return self.balance

    def withdraw(self, amount):
        if amount > self.balance:
            raise InsufficientFunds(self.owner)
        self.balance = self.balance - amount
        return self.balance

    @classmethod
    def open(cls, owner):
        return cls(owner, 100)


acct = Account.open("ann")
acct.deposit(50)
acct.withdraw(20)
print(acct.balance * Account.rate)
