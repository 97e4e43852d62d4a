import json
import logging
import time

from sqlalchemy.exc import SQLAlchemyError

from database.db_config import get_db_engine, get_session_factory
from database.models import Base, Run, Verdict, Witness

logger = logging.getLogger(__name__)


def init_db(url):
    """Initialize the database by creating all tables"""
    Base.metadata.create_all(get_db_engine(url))
    logger.info("Run ledger tables ready")


def _json_or_none(point):
    return None if point is None else json.dumps(list(point))


def record_run(url, report, exit_code):
    """
    Store a finished run with its verdicts and worst witnesses

    Args:
        url: Ledger URL
        report: The run report as written to report.json
        exit_code: Exit code of the run

    Returns:
        bool: True if stored, False on a database error (logged, never raised)
    """
    Session = get_session_factory(url)
    session = Session()
    try:
        run = Run(run_id=report["run-id"], subcommand=report["subcommand"], config_hash=report["config-hash"],
                  exit_code=int(exit_code), created=time.time())
        for verdict in report["verdicts"]:
            run.verdicts.append(Verdict(
                label=verdict["label"],
                class_id=verdict.get("class_id"),
                verdict=verdict["verdict"],
                worst=verdict.get("worst"),
                tolerance=verdict.get("tolerance"),
                sample_count=verdict.get("sample_count"),
            ))
        for witness in report["worst-witnesses"]:
            run.witnesses.append(Witness(
                kind=witness["kind"],
                s=witness.get("s"),
                a=witness.get("a"),
                m1=_json_or_none(witness.get("m1")),
                m2=_json_or_none(witness.get("m2")),
                value=witness.get("value"),
            ))
        session.add(run)
        session.commit()
        logger.info("Recorded run %s (%s, exit %d)", run.run_id, run.subcommand, exit_code)
        return True
    except SQLAlchemyError as e:
        session.rollback()
        logger.error("Error recording run %s: %s", report.get("run-id"), e)
        return False
    finally:
        session.close()


def get_runs(url, subcommand=None):
    """
    Recorded runs, oldest first

    Returns:
        list: dicts with run_id, subcommand, config_hash, exit_code, created
    """
    Session = get_session_factory(url)
    session = Session()
    try:
        query = session.query(Run)
        if subcommand is not None:
            query = query.filter(Run.subcommand == subcommand)
        return [{"run_id": r.run_id, "subcommand": r.subcommand, "config_hash": r.config_hash,
                 "exit_code": r.exit_code, "created": r.created}
                for r in query.order_by(Run.id).all()]
    except SQLAlchemyError as e:
        logger.error("Error reading runs: %s", e)
        return []
    finally:
        session.close()


def get_run_verdicts(url, run_id):
    """Verdicts of the most recent recording of run_id"""
    Session = get_session_factory(url)
    session = Session()
    try:
        run = session.query(Run).filter(Run.run_id == run_id).order_by(Run.id.desc()).first()
        if run is None:
            return []
        return [{"label": v.label, "class_id": v.class_id, "verdict": v.verdict, "worst": v.worst,
                 "tolerance": v.tolerance, "sample_count": v.sample_count} for v in run.verdicts]
    except SQLAlchemyError as e:
        logger.error("Error reading verdicts of run %s: %s", run_id, e)
        return []
    finally:
        session.close()
