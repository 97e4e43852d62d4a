from sqlalchemy import Column, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class Run(Base):
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    run_id = Column(String(32), nullable=False, index=True)
    subcommand = Column(String(20), nullable=False)
    config_hash = Column(String(32), nullable=False)
    exit_code = Column(Integer, nullable=False)
    created = Column(Float, nullable=False)  # Unix timestamp

    # Relationships
    verdicts = relationship("Verdict", back_populates="run", cascade="all, delete-orphan", order_by="Verdict.id")
    witnesses = relationship("Witness", back_populates="run", cascade="all, delete-orphan", order_by="Witness.id")

    def __repr__(self):
        return f"<Run(run_id='{self.run_id}', subcommand='{self.subcommand}', exit_code={self.exit_code})>"


class Verdict(Base):
    __tablename__ = 'verdicts'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id', ondelete='CASCADE'), nullable=False)
    label = Column(String(100), nullable=False)
    class_id = Column(String(30))
    verdict = Column(String(20), nullable=False)
    worst = Column(Float)  # worst residual, margin or escape excess
    tolerance = Column(Float)
    sample_count = Column(Integer)

    run = relationship("Run", back_populates="verdicts")

    def __repr__(self):
        return f"<Verdict(label='{self.label}', verdict='{self.verdict}', worst={self.worst})>"


class Witness(Base):
    __tablename__ = 'witnesses'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id', ondelete='CASCADE'), nullable=False)
    kind = Column(String(60), nullable=False)
    s = Column(Float)
    a = Column(Float)
    m1 = Column(Text)  # JSON list
    m2 = Column(Text)  # JSON list
    value = Column(Float)

    run = relationship("Run", back_populates="witnesses")

    def __repr__(self):
        return f"<Witness(kind='{self.kind}', a={self.a}, s={self.s}, value={self.value})>"
